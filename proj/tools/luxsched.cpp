#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "luxsched/oracle.hpp"
#include "luxsched/pfm.hpp"
#include "luxsched/policy.hpp"
#include "luxsched/sim.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace luxsched;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

void warn(const std::string& msg) { std::cerr << "warning: " << msg << '\n'; }

void require_file(const fs::path& p, const std::string& what) {
  if (!fs::is_regular_file(p)) throw ValidationError(what + " not found: " + p.string());
}

double parse_number(const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size() || !std::isfinite(v)) throw ValidationError("not a number: '" + text + "'");
  return v;
}

// "start:stop:step" inclusive of stop, or a single level.
IntensityGrid parse_levels(const std::string& spec) {
  std::vector<std::string> parts;
  std::stringstream ss(spec);
  for (std::string part; std::getline(ss, part, ':');) parts.push_back(part);
  if (parts.size() == 1) return IntensityGrid({parse_number(parts[0])});
  if (parts.size() != 3) throw ValidationError("level string must be 'start:stop:step' or a single value");
  return IntensityGrid::from_range(parse_number(parts[0]), parse_number(parts[1]), parse_number(parts[2]));
}

std::string level_filename(double k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_k%03d.pfm", static_cast<int>(std::lround(k * 100.0)));
  return buf;
}

EnergyModel load_model(const std::string& weights) {
  if (weights.empty()) return EnergyModel{};
  require_file(weights, "weights file");
  return weights_io::load(weights);
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot create " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

// ---- decompose -----------------------------------------------------------

struct DecomposeArgs {
  std::string image_a, image_b, out;
  double k_a = 0.0, k_b = 0.0;
  double saturation = 1.0;
};

int run_decompose(const DecomposeArgs& a) {
  require_file(a.image_a, "image");
  require_file(a.image_b, "image");
  const LinearImage i1 = pfm::read_color(a.image_a);
  const LinearImage i2 = pfm::read_color(a.image_b);
  DecomposeOptions opt;
  opt.saturation_level = a.saturation;
  const Decomposition d = decompose_paired(i1, a.k_a, i2, a.k_b, opt);

  bool zero_light = true;
  for (double s : d.light_map.values()) zero_light = zero_light && s == 0.0;
  if (zero_light) warn("light map is zero everywhere: the captures show no lamp contribution");

  const double psnr_a = psnr(relight(d, a.k_a), i1);
  const double psnr_b = psnr(relight(d, a.k_b), i2);
  decomposition_io::save(a.out, d);
  auto show = [](double db) {
    std::ostringstream s;
    if (std::isinf(db)) s << "inf";
    else s << std::fixed << std::setprecision(2) << db;
    return s.str();
  };
  std::cout << "round-trip PSNR: " << show(psnr_a) << " dB (k=" << a.k_a << "), " << show(psnr_b) << " dB (k=" << a.k_b
            << ")\n";
  std::cout << "light color: " << d.light_color[0] << ' ' << d.light_color[1] << ' ' << d.light_color[2] << '\n';
  return kExitOk;
}

// ---- relight -------------------------------------------------------------

struct RelightArgs {
  std::string decomposition, out;
  std::string levels = "0.0:1.0:0.1";
  bool clip = false;
};

int run_relight(const RelightArgs& a) {
  const IntensityGrid grid = parse_levels(a.levels);
  std::vector<std::string> names;
  for (double k : grid.levels()) {
    names.push_back(level_filename(k));
    if (names.size() > 1 && names.back() == names[names.size() - 2]) {
      throw ValidationError("levels closer than 1% would share the file name " + names.back());
    }
  }
  if (!fs::is_directory(a.decomposition)) throw ValidationError("decomposition directory not found: " + a.decomposition);
  const Decomposition d = decomposition_io::load(a.decomposition);
  d.validate();

  std::vector<LinearImage> images;
  for (double k : grid.levels()) images.push_back(a.clip ? clip_sensor(relight(d, k)) : relight(d, k));
  fs::create_directories(a.out);
  for (std::size_t i = 0; i < images.size(); ++i) pfm::write(fs::path(a.out) / names[i], images[i]);
  std::cout << "wrote " << images.size() << " image(s) to " << a.out << '\n';
  return kExitOk;
}

// ---- simulate ------------------------------------------------------------

struct SimulateArgs {
  std::string scene, out;
  std::uint64_t seed = 1;
  std::size_t length = 0;
};

int run_simulate(const SimulateArgs& a) {
  SceneSpec spec = harsh_scene(a.seed);
  if (!a.scene.empty()) {
    require_file(a.scene, "scene file");
    spec = scene_io::load(a.scene);
    spec.seed = a.seed;
  }
  if (a.length > 0) spec.length = a.length;
  spec.validate();
  const Sequence seq = generate_sequence(spec);
  scene_io::save_sequence(a.out, seq);
  std::cout << (fs::path(a.out) / "sequence.json").string() << '\n';
  return kExitOk;
}

// ---- build-costs / solve -------------------------------------------------

struct SolveArgs {
  std::string frames_manifest, costs, weights, out;
  bool grid_search = false;
  std::uint64_t seed = 1;
  double threshold = 0.15;
};

Sequence load_sequence_checked(const std::string& manifest) {
  require_file(manifest, "frames manifest");
  return scene_io::load_sequence(manifest);
}

struct SearchEntry {
  double lambda_d, lambda_p, lambda_m;
  double wrmse, trajectory_ratio, energy;
};

int run_build_costs(const SolveArgs& a) {
  const EnergyModel model = load_model(a.weights);
  const Sequence seq = load_sequence_checked(a.frames_manifest);
  const CostTensors costs = build_cost_tensors(model, seq.length(), frame_source(seq, model.grid));
  cost_io::save(a.out, costs);
  std::cout << "wrote " << costs.frames() << " x " << costs.levels() << " cost tensors to " << a.out << '\n';
  return kExitOk;
}

int run_solve(const SolveArgs& a) {
  EnergyModel model = load_model(a.weights);
  if (a.frames_manifest.empty() == a.costs.empty()) {
    throw ValidationError("give exactly one of --frames-manifest or --costs");
  }
  if (a.grid_search && a.frames_manifest.empty()) {
    throw ValidationError("--grid-search needs --frames-manifest: candidates are scored on the tracking proxy");
  }

  CostTensors costs;
  json search_report;
  if (!a.costs.empty()) {
    require_file(a.costs, "cost manifest");
    costs = cost_io::load(a.costs);
    if (!(costs.grid() == model.grid)) {
      if (!a.weights.empty()) warn("weights grid differs from the cost grid; using the cost grid");
      model.grid = costs.grid();
    }
  } else {
    const Sequence seq = load_sequence_checked(a.frames_manifest);
    const PotentialInputs pot = compute_potentials(model, seq.length(), frame_source(seq, model.grid));
    if (a.grid_search) {
      TrackingConfig tc;
      tc.seed = a.seed;
      tc.threshold = a.threshold;
      tc.matcher = model.matcher;
      std::vector<SearchEntry> entries;
      std::size_t best = 0;
      for (double ld : {0.5, 1.0, 2.0}) {
        for (double lp : {0.01, 0.02, 0.05}) {
          for (double lm : {0.5, 1.0, 2.0}) {
            EnergyModel m = model;
            m.lambda_d = ld;
            m.lambda_p = lp;
            m.lambda_m = lm;
            const CostTensors c = build_cost_tensors(m, pot);
            const Schedule s = solve_ois(c, m.power);
            const RolloutResult run = rollout(ScheduleReplay{s.assignment}, seq, m.grid);
            const RunScore score =
                score_run(seq.poses, proxy_tracking(run.observations, seq.poses, tc), run.executed, m.grid, m.power);
            entries.push_back({ld, lp, lm, score.trajectory.wrmse, score.trajectory.trajectory_ratio, s.total_energy});
            if (score.trajectory.wrmse < entries[best].wrmse) best = entries.size() - 1;
          }
        }
      }
      model.lambda_d = entries[best].lambda_d;
      model.lambda_p = entries[best].lambda_p;
      model.lambda_m = entries[best].lambda_m;
      json all = json::array();
      for (const auto& e : entries) {
        all.push_back({{"lambda_d", e.lambda_d},
                       {"lambda_p", e.lambda_p},
                       {"lambda_m", e.lambda_m},
                       {"wrmse", number_or_null(e.wrmse)},
                       {"C", e.trajectory_ratio},
                       {"total_energy", e.energy}});
      }
      search_report = {{"best", all[best]}, {"lambda_s", model.lambda_s}, {"candidates", all}};
      std::cout << "grid search best: lambda_d=" << model.lambda_d << " lambda_p=" << model.lambda_p
                << " lambda_m=" << model.lambda_m << " wrmse=" << entries[best].wrmse << '\n';
    }
    costs = build_cost_tensors(model, pot);
  }

  const Schedule schedule = solve_ois(costs, model.power);
  fs::create_directories(a.out);
  schedule_io::write_csv(fs::path(a.out) / "schedule.csv", costs, schedule);
  schedule_io::write_summary(fs::path(a.out) / "summary.json", schedule);
  if (!search_report.is_null()) write_text(fs::path(a.out) / "grid_search.json", search_report.dump(2) + "\n");
  std::cout << "total_energy=" << std::setprecision(10) << schedule.total_energy
            << " mean_intensity=" << schedule.mean_intensity << " mean_power_watts=" << schedule.mean_power << '\n';
  return kExitOk;
}

// ---- train-policy --------------------------------------------------------

struct TrainArgs {
  std::vector<std::string> sequences, schedules;
  std::vector<std::size_t> strides{8, 10, 12};
  std::string weights, out_model, provenance = "holdover";
  std::uint64_t seed = 1;
  std::size_t hidden = 0, epochs = 200, batch = 32;
  double learning_rate = 0.5;
};

int run_train(const TrainArgs& a) {
  const EnergyModel model = load_model(a.weights);
  if (!a.schedules.empty() && a.schedules.size() != a.sequences.size()) {
    throw ValidationError("--schedules must list one schedule per sequence");
  }
  if (a.provenance != "holdover" && a.provenance != "teacher") {
    throw ValidationError("--provenance must be 'holdover' or 'teacher'");
  }
  const FrameProvenance provenance = a.provenance == "teacher" ? FrameProvenance::Teacher : FrameProvenance::HoldOver;
  for (const auto& s : a.sequences) require_file(s, "sequence manifest");
  for (const auto& s : a.schedules) require_file(s, "schedule");

  SupervisionSet sup;
  sup.levels = model.grid.size();
  for (std::size_t i = 0; i < a.sequences.size(); ++i) {
    const Sequence seq = scene_io::load_sequence(a.sequences[i]);
    const FrameSource frames = frame_source(seq, model.grid);
    std::vector<std::size_t> oracle;
    if (a.schedules.empty()) {
      oracle = solve_ois(build_cost_tensors(model, seq.length(), frames), model.power).assignment;
    } else {
      oracle = schedule_io::read_assignment(a.schedules[i]);
      if (oracle.size() != seq.length()) {
        throw ValidationError("schedule " + a.schedules[i] + " does not match its sequence length");
      }
    }
    std::vector<std::size_t> usable;
    for (std::size_t s : a.strides) {
      if (s == 0) throw ValidationError("strides must be >= 1");
      if (s < seq.length()) usable.push_back(s);
      else warn("stride " + std::to_string(s) + " skipped: sequence " + a.sequences[i] + " is too short");
    }
    if (usable.empty()) continue;
    sup.append(build_supervision(frames, oracle, usable, sup.levels, provenance, i));
  }
  if (sup.samples.empty()) throw ValidationError("empty supervision: no training tuples could be formed");

  TrainConfig cfg;
  cfg.seed = a.seed;
  cfg.hidden = a.hidden;
  cfg.epochs = a.epochs;
  cfg.batch = a.batch;
  cfg.learning_rate = a.learning_rate;
  const TrainResult r = train(sup, model.grid, cfg);
  if (!r.dropped_features.empty()) {
    warn(std::to_string(r.dropped_features.size()) + " constant feature dimension(s) dropped");
  }
  policy_io::save(a.out_model, r.model);
  std::cout << "samples=" << sup.samples.size() << " loss=" << r.loss << " accuracy=" << r.accuracy << '\n';
  return kExitOk;
}

// ---- eval ----------------------------------------------------------------

struct EvalArgs {
  std::string model, spec, sequence, weights, out, intensities;
  std::uint64_t seed = 1;
  std::size_t period = 1;
  double threshold = 0.15;
  bool pretty = false;
};

void print_table(const json& report) {
  std::printf("%-10s %6s %9s %9s %9s %9s %10s\n", "method", "C", "WRMSE", "ATE", "light_mu%", "power_W", "energy");
  for (const auto& m : report.at("methods")) {
    auto num = [](const json& v) { return v.is_null() ? INFINITY : v.get<double>(); };
    std::printf("%-10s %6.2f %9.4f %9.4f %9.1f %9.2f %10.3f\n", m.at("name").get<std::string>().c_str(),
                num(m.at("C")), num(m.at("wrmse")), num(m.at("ate")), num(m.at("light_mu_pct")),
                num(m.at("power_w")), num(m.at("energy")));
  }
}

int run_eval(const EvalArgs& a) {
  const EnergyModel model = load_model(a.weights);
  if (!a.spec.empty() && !a.sequence.empty()) throw ValidationError("give at most one of --spec or --sequence");
  std::optional<PolicyModel> policy;
  if (!a.model.empty()) {
    require_file(a.model, "policy model");
    policy = policy_io::load(a.model);
    if (!(policy->grid == model.grid)) throw ValidationError("policy grid does not match the energy model grid");
  }
  if (a.period == 0) throw ValidationError("--period must be >= 1");

  Sequence seq;
  if (!a.sequence.empty()) {
    seq = load_sequence_checked(a.sequence);
  } else {
    SceneSpec spec = harsh_scene(a.seed);
    if (!a.spec.empty()) {
      require_file(a.spec, "scene file");
      spec = scene_io::load(a.spec);
      spec.seed = a.seed;
    }
    seq = generate_sequence(spec);
  }

  TrackingConfig tc;
  tc.seed = a.seed;
  tc.threshold = a.threshold;
  const Comparison cmp = compare_controllers(seq, model, policy ? &*policy : nullptr, tc, a.period);

  json methods = json::array();
  for (const auto& m : cmp.methods) {
    const auto& tr = m.score.trajectory;
    methods.push_back({{"name", m.name},
                       {"C", tr.trajectory_ratio},
                       {"wrmse", number_or_null(tr.wrmse)},
                       {"ate", number_or_null(tr.ate_rmse)},
                       {"light_mu_pct", 100.0 * m.score.mean_intensity},
                       {"power_w", m.score.mean_power},
                       {"energy", m.energy},
                       {"tracked_frames", tr.pred_length}});
  }
  const json report = {{"frames", seq.length()},
                       {"seed", a.seed},
                       {"weights",
                        {{"lambda_d", model.lambda_d},
                         {"lambda_p", model.lambda_p},
                         {"lambda_m", model.lambda_m},
                         {"lambda_s", model.lambda_s}}},
                       {"methods", methods}};

  std::ostringstream csv;
  csv << "frame";
  for (const auto& m : cmp.methods) csv << ',' << m.name;
  csv << '\n';
  for (std::size_t t = 0; t < seq.length(); ++t) {
    csv << t;
    for (const auto& m : cmp.methods) csv << ',' << model.grid[m.executed[t]];
    csv << '\n';
  }

  if (!a.out.empty()) write_text(a.out, report.dump(2) + "\n");
  if (!a.intensities.empty()) write_text(a.intensities, csv.str());
  if (a.pretty) print_table(report);
  else if (a.out.empty()) std::cout << report.dump(2) << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Light intensity scheduling: relighting, optimal schedules and learned control"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "luxsched 0.1.0");

  DecomposeArgs dec;
  auto* c_dec = app.add_subcommand("decompose", "Split two captures at different light levels into ambient and light");
  c_dec->add_option("--image-a", dec.image_a, "First capture (PFM)")->required();
  c_dec->add_option("--k-a", dec.k_a, "Light level of the first capture")->required();
  c_dec->add_option("--image-b", dec.image_b, "Second capture (PFM)")->required();
  c_dec->add_option("--k-b", dec.k_b, "Light level of the second capture")->required();
  c_dec->add_option("--out", dec.out, "Output decomposition directory")->required();
  c_dec->add_option("--saturation", dec.saturation, "Channel value treated as clipped")->capture_default_str();

  RelightArgs rel;
  auto* c_rel = app.add_subcommand("relight", "Render a decomposition at one or more light levels");
  c_rel->add_option("--decomposition", rel.decomposition, "Decomposition directory")->required();
  c_rel->add_option("--levels", rel.levels, "'start:stop:step' (inclusive) or a single level")->capture_default_str();
  c_rel->add_option("--out", rel.out, "Output directory")->required();
  c_rel->add_flag("--clip", rel.clip, "Clip to the sensor range [0, 1]");

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Generate a synthetic sequence");
  c_sim->add_option("--scene", sim.scene, "Scene JSON (default: the harsh reference scene)");
  c_sim->add_option("--length", sim.length, "Override the number of frames");
  c_sim->add_option("--seed", sim.seed, "Random seed")->capture_default_str();
  c_sim->add_option("--out", sim.out, "Output directory")->required();

  SolveArgs costs_args;
  auto* c_costs = app.add_subcommand("build-costs", "Evaluate unary and pairwise costs for a sequence");
  c_costs->add_option("--frames-manifest", costs_args.frames_manifest, "Sequence manifest")->required();
  c_costs->add_option("--weights", costs_args.weights, "Weights JSON");
  c_costs->add_option("--out", costs_args.out, "Output cost manifest (JSON)")->required();

  SolveArgs sol;
  auto* c_sol = app.add_subcommand("solve", "Compute the optimal intensity schedule");
  c_sol->add_option("--frames-manifest", sol.frames_manifest, "Sequence manifest");
  c_sol->add_option("--costs", sol.costs, "Precomputed cost manifest");
  c_sol->add_option("--weights", sol.weights, "Weights JSON");
  c_sol->add_option("--out", sol.out, "Output directory")->required();
  c_sol->add_flag("--grid-search", sol.grid_search, "Pick (lambda_d, lambda_p, lambda_m) by WRMSE on the proxy");
  c_sol->add_option("--threshold", sol.threshold, "Tracking threshold for the grid search")->capture_default_str();
  c_sol->add_option("--seed", sol.seed, "Random seed")->capture_default_str();

  TrainArgs tr;
  auto* c_tr = app.add_subcommand("train-policy", "Distil oracle schedules into a light policy");
  c_tr->add_option("--sequences", tr.sequences, "Sequence manifests");
  c_tr->add_option("--schedules", tr.schedules, "Schedule CSVs, one per sequence (default: solve them)");
  c_tr->add_option("--strides", tr.strides, "Supervision strides")->delimiter(',')->capture_default_str();
  c_tr->add_option("--weights", tr.weights, "Weights JSON");
  c_tr->add_option("--provenance", tr.provenance, "Training frames: holdover or teacher")->capture_default_str();
  c_tr->add_option("--hidden", tr.hidden, "Hidden units (0: linear)")->capture_default_str();
  c_tr->add_option("--epochs", tr.epochs)->capture_default_str();
  c_tr->add_option("--batch", tr.batch)->capture_default_str();
  c_tr->add_option("--lr", tr.learning_rate)->capture_default_str();
  c_tr->add_option("--seed", tr.seed, "Random seed")->capture_default_str();
  c_tr->add_option("--out-model", tr.out_model, "Output model JSON")->required();

  EvalArgs ev;
  auto* c_ev = app.add_subcommand("eval", "Compare fixed lights, the policy and the oracle on a sequence");
  c_ev->add_option("--model", ev.model, "Policy model JSON");
  c_ev->add_option("--spec", ev.spec, "Scene JSON (default: the harsh reference scene)");
  c_ev->add_option("--sequence", ev.sequence, "Saved sequence manifest instead of a generated scene");
  c_ev->add_option("--weights", ev.weights, "Weights JSON");
  c_ev->add_option("--period", ev.period, "Frames between policy decisions")->capture_default_str();
  c_ev->add_option("--threshold", ev.threshold, "Tracking threshold")->capture_default_str();
  c_ev->add_option("--seed", ev.seed, "Random seed")->capture_default_str();
  c_ev->add_option("--out", ev.out, "Report JSON path (default: stdout)");
  c_ev->add_option("--intensities", ev.intensities, "Per-frame intensity CSV path");
  c_ev->add_flag("--pretty", ev.pretty, "Print a table instead of JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*c_dec) return run_decompose(dec);
    if (*c_rel) return run_relight(rel);
    if (*c_sim) return run_simulate(sim);
    if (*c_costs) return run_build_costs(costs_args);
    if (*c_sol) return run_solve(sol);
    if (*c_tr) return run_train(tr);
    if (*c_ev) return run_eval(ev);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
  return kExitOk;
}
