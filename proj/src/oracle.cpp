#include "luxsched/oracle.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <sstream>
#include <string>

namespace luxsched {

namespace {

void require_finite(const CostTensors& costs) {
  if (costs.frames() == 0 || costs.levels() == 0) throw ValidationError("empty cost tensors");
  if (!costs.finite()) throw NumericalError("cost tensors contain NaN or infinite entries");
}

}  // namespace

double evaluate_schedule(const CostTensors& costs, std::span<const std::size_t> assignment) {
  if (assignment.size() != costs.frames()) {
    throw ValidationError("assignment length does not match the number of frames");
  }
  for (std::size_t k : assignment) {
    if (k >= costs.levels()) throw ValidationError("assignment index out of range");
  }
  double e = costs.unary(0, assignment[0]);
  for (std::size_t t = 1; t < assignment.size(); ++t) {
    e = costs.unary(t, assignment[t]) + (e + costs.pairwise(t - 1, assignment[t - 1], assignment[t]));
  }
  return e;
}

TrellisState forward_pass(const CostTensors& costs) {
  require_finite(costs);
  const std::size_t frames = costs.frames();
  const std::size_t levels = costs.levels();
  TrellisState s;
  s.frames = frames;
  s.levels = levels;
  s.prefix_energy.resize(frames * levels);
  s.backpointer.assign(frames * levels, TrellisState::kNoPredecessor);

  for (std::size_t k = 0; k < levels; ++k) s.prefix_energy[k] = costs.unary(0, k);
  for (std::size_t t = 1; t < frames; ++t) {
    const double* prev = &s.prefix_energy[(t - 1) * levels];
    for (std::size_t k = 0; k < levels; ++k) {
      double best = prev[0] + costs.pairwise(t - 1, 0, k);
      std::size_t arg = 0;
      for (std::size_t l = 1; l < levels; ++l) {
        const double cand = prev[l] + costs.pairwise(t - 1, l, k);
        if (cand < best) {
          best = cand;
          arg = l;
        }
      }
      s.prefix_energy[t * levels + k] = costs.unary(t, k) + best;
      s.backpointer[t * levels + k] = arg;
    }
  }
  return s;
}

std::vector<std::size_t> backtrack(const TrellisState& trellis) {
  if (trellis.frames == 0 || trellis.levels == 0) throw ValidationError("empty trellis");
  std::vector<std::size_t> path(trellis.frames);
  const std::size_t last = trellis.frames - 1;
  std::size_t k = 0;
  for (std::size_t j = 1; j < trellis.levels; ++j) {
    if (trellis.prefix(last, j) < trellis.prefix(last, k)) k = j;
  }
  path[last] = k;
  for (std::size_t t = last; t > 0; --t) {
    k = trellis.predecessor(t, k);
    path[t - 1] = k;
  }
  return path;
}

Schedule make_schedule(const CostTensors& costs, std::vector<std::size_t> assignment, const PowerModel& power) {
  Schedule s;
  s.total_energy = evaluate_schedule(costs, assignment);
  double intensity = 0.0;
  double watts = 0.0;
  for (std::size_t k : assignment) {
    intensity += costs.grid()[k];
    watts += power(costs.grid()[k]);
  }
  s.mean_intensity = intensity / static_cast<double>(assignment.size());
  s.mean_power = watts / static_cast<double>(assignment.size());
  s.assignment = std::move(assignment);
  return s;
}

Schedule solve_ois(const CostTensors& costs, const PowerModel& power) {
  return make_schedule(costs, backtrack(forward_pass(costs)), power);
}

Schedule brute_force_ois(const CostTensors& costs, const PowerModel& power) {
  require_finite(costs);
  const std::size_t frames = costs.frames();
  const std::size_t levels = costs.levels();
  double total = 1.0;
  for (std::size_t t = 0; t < frames; ++t) {
    total *= static_cast<double>(levels);
    if (total > static_cast<double>(kBruteForceLimit)) {
      throw InstanceTooLargeError("instance too large for exhaustive search (|K|^T > 1e7)");
    }
  }

  // Odometer with frame 0 as the fastest digit: assignments are visited in
  // lexicographic order of (k_{T-1}, ..., k_0), so keeping the first strict
  // minimum reproduces the backward lowest-index tie-break of the DP.
  std::vector<std::size_t> current(frames, 0);
  std::vector<std::size_t> best = current;
  double best_energy = evaluate_schedule(costs, current);
  while (true) {
    std::size_t t = 0;
    while (t < frames && ++current[t] == levels) current[t++] = 0;
    if (t == frames) break;
    const double e = evaluate_schedule(costs, current);
    if (e < best_energy) {
      best_energy = e;
      best = current;
    }
  }
  return make_schedule(costs, std::move(best), power);
}

namespace schedule_io {

void write_csv(const std::filesystem::path& path, const CostTensors& costs, const Schedule& schedule) {
  const auto& a = schedule.assignment;
  if (a.size() != costs.frames()) throw ValidationError("schedule length does not match the costs");
  std::ofstream out(path);
  if (!out) throw IoError("cannot create " + path.string());
  out << "frame,intensity_index,intensity,unary,pairwise_to_next\n";
  out << std::setprecision(17);
  for (std::size_t t = 0; t < a.size(); ++t) {
    const double pair = t + 1 < a.size() ? costs.pairwise(t, a[t], a[t + 1]) : 0.0;
    out << t << ',' << a[t] << ',' << costs.grid()[a[t]] << ',' << costs.unary(t, a[t]) << ',' << pair << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<CsvRow> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("frame,intensity_index", 0) != 0) {
    throw IoError(path.string() + " is not a schedule CSV");
  }
  std::vector<CsvRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    CsvRow r;
    char c1 = 0, c2 = 0, c3 = 0, c4 = 0;
    if (!(ss >> r.frame >> c1 >> r.intensity_index >> c2 >> r.intensity >> c3 >> r.unary >> c4 >>
          r.pairwise_to_next) ||
        c1 != ',' || c2 != ',' || c3 != ',' || c4 != ',') {
      throw IoError("malformed schedule row in " + path.string() + ": " + line);
    }
    rows.push_back(r);
  }
  return rows;
}

std::vector<std::size_t> read_assignment(const std::filesystem::path& path) {
  std::vector<std::size_t> a;
  for (const auto& r : read_csv(path)) a.push_back(r.intensity_index);
  return a;
}

void write_summary(const std::filesystem::path& path, const Schedule& schedule) {
  const nlohmann::json j = {{"total_energy", schedule.total_energy},
                            {"mean_intensity", schedule.mean_intensity},
                            {"mean_power_watts", schedule.mean_power}};
  std::ofstream out(path);
  if (!out) throw IoError("cannot create " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace schedule_io

}  // namespace luxsched
