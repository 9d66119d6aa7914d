// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "luxsched/oracle.hpp"
#include "luxsched/pfm.hpp"
#include "luxsched/policy.hpp"
#include "luxsched/sim.hpp"
#include "support.hpp"

using namespace luxsched;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::string detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

template <typename... Args>
std::string fmt(const char* f, Args... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Outcome dp_exactness() {
  Outcome o;
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> frames(1, 8), levels(1, 4);
  const auto t0 = Clock::now();
  int agree = 0;
  const int trials = 200;
  for (int i = 0; i < trials; ++i) {
    const CostTensors c = testing::random_costs(frames(rng), levels(rng), rng, i % 2 == 0);
    const Schedule dp = solve_ois(c), bf = brute_force_ois(c);
    agree += dp.total_energy == bf.total_energy && dp.assignment == bf.assignment;
  }
  const double elapsed = seconds_since(t0);
  o.require(agree == trials, fmt("%d/%d instances agree", agree, trials));
  o.require(elapsed < 5.0, fmt("took %.3f s", elapsed));
  o.detail = fmt("%d/%d instances identical, %.3f s", agree, trials, elapsed) + (o.pass ? "" : " | " + o.detail);
  return o;
}

Outcome dp_scale() {
  Outcome o;
  std::mt19937_64 rng(7);
  const CostTensors c = testing::random_costs(1000, 11, rng);
  double best = INFINITY;
  for (int rep = 0; rep < 5; ++rep) {
    const auto t0 = Clock::now();
    const Schedule s = solve_ois(c);
    best = std::min(best, seconds_since(t0));
    o.require(s.assignment.size() == 1000, "wrong schedule length");
  }
  o.require(best < 0.050, fmt("solve took %.2f ms", best * 1e3));
  o.detail = fmt("T=1000 |K|=11 solved in %.3f ms", best * 1e3) + (o.pass ? "" : " | " + o.detail);
  return o;
}

Outcome relighting() {
  Outcome o;
  std::mt19937_64 rng(3);
  const Decomposition d = testing::random_decomposition(64, 48, rng);
  o.require(relight(d, 0.0) == d.ambient, "relight(d, 0) differs from ambient");

  double lin = 0.0;
  const LinearImage a = relight(d, 0.1), b = relight(d, 0.45), c = relight(d, 0.9);
  const double s = (0.45 - 0.1) / (0.9 - 0.1);
  for (std::size_t i = 0; i < b.size(); ++i) {
    lin = std::max(lin, std::abs(b.values()[i] - (a.values()[i] + s * (c.values()[i] - a.values()[i]))));
  }
  o.require(lin < 1e-12, fmt("linearity error %.3g", lin));

  const Decomposition got = decompose_paired(relight(d, 0.25), 0.25, relight(d, 0.75), 0.75);
  double num = 0.0, den = 0.0;
  for (std::size_t p = 0; p < d.ambient.pixel_count(); ++p) {
    for (int ch = 0; ch < 3; ++ch) {
      const double want = d.light_map.values()[p] * d.light_color[ch];
      const double have = got.light_map.values()[p] * got.light_color[ch];
      num += (have - want) * (have - want);
      den += want * want;
    }
  }
  const double rel = std::sqrt(num / den);
  const double db = std::min(psnr(relight(got, 0.25), relight(d, 0.25)), psnr(relight(got, 0.75), relight(d, 0.75)));
  o.require(rel < 1e-6, fmt("round-trip error %.3g", rel));
  o.require(db > 60.0, fmt("round-trip PSNR %.1f dB", db));
  o.detail = fmt("linearity %.2g, round-trip rel. error %.2g, PSNR %.1f dB", lin, rel, db) +
             (o.pass ? "" : " | " + o.detail);
  return o;
}

Outcome power_model() {
  Outcome o;
  const EnergyModel m;
  const double p62 = power(m, 0.62), p0 = power(m, 0.0);
  o.require(std::abs(p62 - 22.79) <= 0.15, fmt("P(0.62) = %.4f", p62));
  o.require(p0 == 9.5455, fmt("P(0) = %.6f", p0));
  o.detail = fmt("P(0.62) = %.4f W, P(0) = %.4f W", p62, p0) + (o.pass ? "" : " | " + o.detail);
  return o;
}

Outcome metric_formulas() {
  Outcome o;
  const double c = trajectory_ratio(500, 1000);
  const double w = weighted_rmse(0.236, c);
  o.require(std::abs(c - 0.5) < 1e-12, fmt("C = %.6f", c));
  o.require(std::abs(w - 0.944) <= 1e-3, fmt("WRMSE = %.6f", w));
  o.detail = fmt("C = %.3f, WRMSE = %.4f", c, w) + (o.pass ? "" : " | " + o.detail);
  return o;
}

Outcome smoothness_sweep() {
  Outcome o;
  const Sequence seq = generate_sequence(harsh_scene(1));
  EnergyModel model;
  const PotentialInputs pot = compute_potentials(model, seq.length(), frame_source(seq, model.grid));
  double previous = INFINITY;
  std::string trace;
  bool constant = false;
  for (double ls : {0.0, 0.1, 1.0, 10.0, 100.0}) {
    model.lambda_s = ls;
    const Schedule s = solve_ois(build_cost_tensors(model, pot), model.power);
    double tv = 0.0;
    for (std::size_t t = 0; t + 1 < s.assignment.size(); ++t) {
      tv += std::abs(model.grid[s.assignment[t + 1]] - model.grid[s.assignment[t]]);
    }
    o.require(tv <= previous, fmt("TV rose to %.2f at lambda_S = %g", tv, ls));
    previous = tv;
    constant = tv == 0.0;
    trace += fmt("%s%.1f", trace.empty() ? "" : " ", tv);
  }
  o.require(constant, "largest lambda_S schedule is not constant");
  o.detail = "TV over lambda_S sweep: " + trace + (o.pass ? "" : " | " + o.detail);
  return o;
}

Outcome end_to_end() {
  Outcome o;
  const EnergyModel model;
  const std::vector<std::size_t> strides = {8, 10, 12};
  SupervisionSet sup;
  sup.levels = model.grid.size();
  for (std::uint64_t seed = 101; seed <= 104; ++seed) {
    const Sequence seq = generate_sequence(harsh_scene(seed));
    const FrameSource frames = frame_source(seq, model.grid);
    const Schedule oracle = solve_ois(build_cost_tensors(model, seq.length(), frames), model.power);
    sup.append(build_supervision(frames, oracle.assignment, strides, sup.levels, FrameProvenance::HoldOver, seed));
  }
  const TrainResult policy = train(sup, model.grid);

  std::string detail;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Sequence seq = generate_sequence(harsh_scene(seed));
    const Comparison cmp = compare_controllers(seq, model, &policy.model);
    const auto& oracle = cmp.method("oracle");
    const auto& ilc = cmp.method("ilc");
    const auto& f0 = cmp.method("fixed_0");
    const auto& f100 = cmp.method("fixed_100");
    const double best_fixed = std::min(f0.energy, f100.energy);
    const double worst_fixed_c = std::min(f0.score.trajectory.trajectory_ratio, f100.score.trajectory.trajectory_ratio);
    const std::string tag = fmt("seed %d: ", int(seed));
    o.require(oracle.energy <= ilc.energy, tag + "oracle energy above ILC");
    o.require(ilc.energy <= best_fixed, tag + "ILC energy above best fixed baseline");
    o.require(oracle.score.trajectory.trajectory_ratio >= 0.9, tag + "oracle C < 0.9");
    o.require(ilc.score.trajectory.trajectory_ratio >= 0.9, tag + "ILC C < 0.9");
    o.require(worst_fixed_c <= 0.6, tag + "no fixed baseline with C <= 0.6");
    detail += fmt("%sE %.1f/%.1f/%.1f C %.2f/%.2f/%.2f", detail.empty() ? "" : "; ", oracle.energy, ilc.energy,
                  best_fixed, oracle.score.trajectory.trajectory_ratio, ilc.score.trajectory.trajectory_ratio,
                  worst_fixed_c);
  }
  o.detail = "oracle/ILC/fixed: " + detail + (o.pass ? "" : " | " + o.detail);
  return o;
}

Outcome policy_training() {
  Outcome o;
  std::mt19937_64 rng(8);
  double grad = 0.0;
  for (int i = 0; i < 5; ++i) {
    grad = std::max(grad, testing::gradient_relative_error({16, 0, 11}, rng));
    grad = std::max(grad, testing::gradient_relative_error({16, 32, 11}, rng));
  }
  o.require(grad < 1e-5, fmt("gradient relative error %.3g", grad));

  const SupervisionSet set = testing::separable_set(11, rng);
  const auto t0 = Clock::now();
  const TrainResult a = train(set, IntensityGrid{});
  const TrainResult b = train(set, IntensityGrid{});
  TrainConfig mlp;
  mlp.hidden = 32;
  const TrainResult c = train(set, IntensityGrid{}, mlp);
  const TrainResult d = train(set, IntensityGrid{}, mlp);
  const double elapsed = seconds_since(t0);
  o.require(a.accuracy >= 0.95, fmt("linear accuracy %.3f", a.accuracy));
  o.require(c.accuracy >= 0.95, fmt("hidden-layer accuracy %.3f", c.accuracy));
  o.require(a.model == b.model && c.model == d.model, "retraining is not bit-identical");
  o.require(elapsed < 60.0, fmt("training took %.1f s", elapsed));
  o.detail = fmt("grad rel. error %.2g, accuracy %.3f/%.3f, deterministic, %.2f s", grad, a.accuracy, c.accuracy,
                 elapsed) +
             (o.pass ? "" : " | " + o.detail);
  return o;
}

Outcome io_roundtrips() {
  Outcome o;
  testing::TempDir dir("acceptance");
  std::mt19937_64 rng(9);
  LinearImage img = testing::random_image(33, 21, rng, -1.0, 4.0);
  for (double& v : img.values()) v = static_cast<float>(v);
  pfm::write(dir / "img.pfm", img);
  o.require(pfm::read_color(dir / "img.pfm") == img, "color PFM changed");
  ScalarMap map(17, 9);
  for (double& v : map.values()) v = static_cast<float>(std::uniform_real_distribution<double>(0, 3)(rng));
  pfm::write(dir / "map.pfm", map);
  o.require(pfm::read_gray(dir / "map.pfm") == map, "gray PFM changed");

  const CostTensors costs = testing::random_costs(50, 11, rng);
  cost_io::save(dir / "costs.json", costs);
  o.require(cost_io::load(dir / "costs.json") == costs, "cost tensors changed");

  const Schedule s = solve_ois(costs);
  schedule_io::write_csv(dir / "s.csv", costs, s);
  const double reevaluated = evaluate_schedule(costs, schedule_io::read_assignment(dir / "s.csv"));
  double summed = 0.0;
  for (const auto& row : schedule_io::read_csv(dir / "s.csv")) summed += row.unary + row.pairwise_to_next;
  const double err = std::max(std::abs(reevaluated - s.total_energy), std::abs(summed - s.total_energy));
  o.require(err <= 1e-9, fmt("CSV energy off by %.3g", err));
  o.detail = fmt("PFM and cost binaries bit-exact, CSV energy error %.2g", err) + (o.pass ? "" : " | " + o.detail);
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"DP exactness vs brute force", dp_exactness},
      {"DP scale T=1000 |K|=11", dp_scale},
      {"relighting algebra and round trip", relighting},
      {"power model constants", power_model},
      {"trajectory ratio and WRMSE formulas", metric_formulas},
      {"smoothness sweep", smoothness_sweep},
      {"end-to-end ordering on harsh scenes", end_to_end},
      {"policy training", policy_training},
      {"I/O round trips", io_roundtrips},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failures += !o.pass;
    std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", int(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
