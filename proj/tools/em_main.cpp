#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "overem/experiments.hpp"
#include "overem/fixedpoint.hpp"
#include "overem/io.hpp"
#include "overem/landscape.hpp"
#include "overem/population.hpp"
#include "overem/rng.hpp"

using namespace overem;

namespace {

constexpr int kExitOk = 0, kExitCheckFailed = 1, kExitUsage = 2;

Vector parse_vector(const std::string& s, const std::string& what) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      v.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw CLI::ValidationError(what, "expected comma-separated numbers, got '" + s + "'");
    }
  }
  if (v.empty()) throw CLI::ValidationError(what, "empty vector");
  return Eigen::Map<Vector>(v.data(), Eigen::Index(v.size()));
}

// Output sink: --out path or stdout.
struct Sink {
  std::ofstream file;
  std::ostream* os = &std::cout;
  explicit Sink(const std::string& path) {
    if (path.empty() || path == "-") return;
    file.open(path, std::ios::binary);
    if (!file) throw Error("cannot write " + path);
    os = &file;
  }
  std::ostream& operator*() { return *os; }
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

struct Common {
  std::uint64_t seed = 1;
  int jobs = 0;
  bool pretty = false;
  std::string out;
};

void add_common(CLI::App* sub, Common& c, bool seeded) {
  if (seeded) sub->add_option("--seed", c.seed, "master seed")->capture_default_str();
  sub->add_option("--jobs", c.jobs, "worker threads (0 = all cores)")->capture_default_str();
  sub->add_flag("--pretty", c.pretty, "human-readable output");
  sub->add_option("--out", c.out, "output file (default stdout)");
  sub->add_option("--spec", "JSON file whose keys override flags of the same name");
}

// --spec file.json: every key k becomes `--k value`, replacing the flag from the command line.
std::vector<std::string> apply_spec(std::vector<std::string> args) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--spec" && i + 1 < args.size()) path = args[i + 1];
    else if (args[i].rfind("--spec=", 0) == 0) path = args[i].substr(7);
  }
  if (path.empty()) return args;
  std::ifstream in(path);
  if (!in) throw CLI::ValidationError("--spec", "cannot open " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw CLI::ValidationError("--spec", e.what());
  }
  if (!j.is_object()) throw CLI::ValidationError("--spec", "top level must be an object");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < args.size(); ++i) {
    bool drop = false;
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string flag = "--" + it.key();
      if (args[i] == flag) {
        drop = true;
        if (!it.value().is_boolean() && i + 1 < args.size()) ++i;
      } else if (args[i].rfind(flag + "=", 0) == 0) {
        drop = true;
      }
    }
    if (!drop) out.push_back(args[i]);
  }
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto& v = it.value();
    if (v.is_boolean()) {
      if (v.get<bool>()) out.push_back("--" + it.key());
    } else if (v.is_array()) {
      std::string joined;
      for (std::size_t k = 0; k < v.size(); ++k) joined += (k ? "," : "") + v[k].dump();
      out.push_back("--" + it.key());
      out.push_back(joined);
    } else {
      out.push_back("--" + it.key());
      out.push_back(v.is_string() ? v.get<std::string>() : v.dump());
    }
  }
  return out;
}

void announce(const char* cmd, std::uint64_t seed, bool seeded) {
  std::cerr << "em " << cmd << ": version=" << version();
  if (seeded) std::cerr << " seed=" << seed;
  else std::cerr << " seed=unused";
  std::cerr << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EM for Gaussian mixtures: sample and population iterations, fixed points, landscape, "
               "success-probability tables"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(version()));

  // run
  Common run_c;
  std::string run_model, run_data, run_variant = "model2", run_init = "sample";
  std::size_t run_n = 1000;
  int run_max_iter = 2000;
  double run_tol = 1e-9;
  auto* run = app.add_subcommand("run", "run sample EM and print a JSON RunResult");
  run->add_option("--model", run_model, "truth model JSON")->required()->check(CLI::ExistingFile);
  run->add_option("--data", run_data, "dataset CSV (default: sample n points from the model)");
  run->add_option("--n", run_n, "sample size when sampling")->capture_default_str()->check(CLI::PositiveNumber);
  run->add_option("--variant", run_variant, "model1 (known weights) or model2")
      ->capture_default_str()
      ->check(CLI::IsMember({"model1", "model2"}));
  run->add_option("--init", run_init, "sample or truth")->capture_default_str()->check(CLI::IsMember({"sample", "truth"}));
  run->add_option("--max-iter", run_max_iter)->capture_default_str()->check(CLI::PositiveNumber);
  run->add_option("--tol", run_tol)->capture_default_str()->check(CLI::PositiveNumber);
  add_common(run, run_c, true);

  // popem
  Common pop_c;
  std::string pop_star, pop_theta0, pop_variant = "em2";
  double pop_w1_star = 0.7, pop_w0 = 0.5, pop_tol = 1e-12;
  int pop_max_iter = 2000, pop_nodes = 150;
  auto* popem = app.add_subcommand("popem", "population EM trajectory as CSV");
  popem->add_option("--theta-star", pop_star, "true mean, comma separated")->required();
  popem->add_option("--w1-star", pop_w1_star)->capture_default_str()->check(CLI::Range(0.0, 1.0));
  popem->add_option("--theta0", pop_theta0, "initial mean, comma separated")->required();
  popem->add_option("--w0", pop_w0, "initial weight (em2)")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  popem->add_option("--variant", pop_variant)->capture_default_str()->check(CLI::IsMember({"em1", "em2"}));
  popem->add_option("--max-iter", pop_max_iter)->capture_default_str()->check(CLI::PositiveNumber);
  popem->add_option("--tol", pop_tol)->capture_default_str()->check(CLI::PositiveNumber);
  popem->add_option("--nodes", pop_nodes, "quadrature nodes")->capture_default_str()->check(CLI::Range(40, 1000));
  add_common(popem, pop_c, false);

  // fixed-points
  Common fp_c;
  double fp_star = 1.0, fp_w1 = 0.7;
  int fp_nodes = 150;
  auto* fixed = app.add_subcommand("fixed-points", "fixed points of the known-weights population map H");
  fixed->add_option("--theta-star", fp_star)->capture_default_str()->check(CLI::PositiveNumber);
  fixed->add_option("--w1-star", fp_w1)->capture_default_str()->check(CLI::Range(0.0, 1.0));
  fixed->add_option("--nodes", fp_nodes)->capture_default_str()->check(CLI::Range(40, 1000));
  add_common(fixed, fp_c, false);

  // bifurcation
  Common bif_c;
  double bif_star = 1.0, bif_tol = 1e-4;
  std::string bif_scan;
  int bif_scan_points = 50;
  auto* bif = app.add_subcommand("bifurcation", "w1* where H drops from three fixed points to one");
  bif->add_option("--theta-star", bif_star)->capture_default_str()->check(CLI::PositiveNumber);
  bif->add_option("--tol", bif_tol)->capture_default_str()->check(CLI::PositiveNumber);
  bif->add_option("--scan", bif_scan, "also write w1_star,fixed_point_count,locations CSV here");
  bif->add_option("--scan-points", bif_scan_points)->capture_default_str()->check(CLI::Range(2, 10000));
  add_common(bif, bif_c, false);

  // landscape
  Common land_c;
  std::string land_star = "1", land_raster;
  double land_w1 = 0.7;
  int land_grid = 60, land_raster_grid = 101;
  auto* land = app.add_subcommand("landscape", "stationary points of the population log-likelihood");
  land->add_option("--theta-star", land_star, "true mean, d = 1 or 2")->capture_default_str();
  land->add_option("--w1-star", land_w1)->capture_default_str()->check(CLI::Range(0.0, 1.0));
  land->add_option("--grid", land_grid)->capture_default_str()->check(CLI::Range(5, 400));
  land->add_option("--raster", land_raster, "write a d = 1 raster CSV here");
  land->add_option("--raster-grid", land_raster_grid)->capture_default_str()->check(CLI::Range(2, 2000));
  add_common(land, land_c, false);

  // verify
  Common ver_c;
  double ver_star = 1.0, ver_w1 = 0.7, ver_eps = 0.0, ver_delta = 0.0;
  int ver_grid = 100;
  bool ver_search = false;
  auto* verify = app.add_subcommand("verify", "grid checks of the fixed-point sandwich inequalities (JSON)");
  verify->add_option("--theta-star", ver_star)->capture_default_str()->check(CLI::PositiveNumber);
  verify->add_option("--w1-star", ver_w1)->capture_default_str()->check(CLI::Range(0.5, 1.0));
  verify->add_option("--epsilon", ver_eps)->capture_default_str();
  verify->add_option("--delta", ver_delta)->capture_default_str();
  verify->add_option("--grid", ver_grid)->capture_default_str()->check(CLI::Range(50, 10000));
  verify->add_flag("--search", ver_search, "search for an adjusted curve when the plain one fails");
  add_common(verify, ver_c, false);

  // reproduce
  Common rep_c;
  std::string rep_table, rep_dataset = "fresh";
  int rep_trials = 0;
  auto* reproduce = app.add_subcommand("reproduce", "success-probability table vs reference values (CSV)");
  reproduce->add_option("--table", rep_table)->required()->check(CLI::IsMember({"main2g", "full2g", "cases", "p3"}));
  reproduce->add_option("--trials", rep_trials, "trials per cell (default 500, or 300 for cases)")
      ->check(CLI::PositiveNumber);
  reproduce->add_option("--dataset", rep_dataset, "fresh per trial, or shared per cell")
      ->capture_default_str()
      ->check(CLI::IsMember({"fresh", "shared"}));
  add_common(reproduce, rep_c, true);

  // track
  Common tr_c;
  std::string tr_star = "1";
  double tr_w1 = 0.7;
  std::size_t tr_n = 100000;
  int tr_horizon = 50, tr_seeds = 20;
  auto* track = app.add_subcommand("track", "sample EM2 vs population EM2 deviation");
  track->add_option("--theta-star", tr_star)->capture_default_str();
  track->add_option("--w1-star", tr_w1)->capture_default_str()->check(CLI::Range(0.0, 1.0));
  track->add_option("--n", tr_n)->capture_default_str()->check(CLI::Range(std::size_t(10000), std::size_t(1) << 40));
  track->add_option("--horizon", tr_horizon)->capture_default_str()->check(CLI::PositiveNumber);
  track->add_option("--seeds", tr_seeds)->capture_default_str()->check(CLI::PositiveNumber);
  add_common(track, tr_c, true);

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = apply_spec(args);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << "\n\n";
    CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    std::cerr << sub->help();
    return kExitUsage;
  }

  try {
    if (*run) {
      announce("run", run_c.seed, true);
      GaussianMixture truth = read_model_json(run_model);
      Dataset data = run_data.empty() ? sample(truth, run_n, derive_seed(run_c.seed, 1))
                                      : read_dataset_csv(run_data);
      require(data.dim() == truth.dim(), "dataset and model dimensions differ");
      const ModelVariant v = run_variant == "model1" ? ModelVariant::KnownWeights : ModelVariant::FreeWeights;
      InitSpec init = run_init == "truth" ? InitSpec::explicit_means(truth.means()) : InitSpec::from_sample();
      EmState s = initialize(init, v, truth.k(), &data, derive_seed(run_c.seed, 2));
      if (v == ModelVariant::KnownWeights) s.weights = truth.weights();
      RunResult r = run_em(s, data, run_max_iter, run_tol);
      double err = weighted_permutation_error(r.final_state.means, truth).error;
      Sink out(run_c.out);
      *out << run_result_to_json(r, err, run_c.pretty) << '\n';
      return kExitOk;
    }
    if (*popem) {
      announce("popem", 0, false);
      Vector star = parse_vector(pop_star, "--theta-star");
      Vector th0 = parse_vector(pop_theta0, "--theta0");
      if (star.size() != th0.size()) throw CLI::ValidationError("--theta0", "dimension differs from --theta-star");
      PopVariant v = pop_variant == "em1" ? PopVariant::EM1 : PopVariant::EM2;
      PopState s0{th0, v == PopVariant::EM1 ? pop_w1_star : pop_w0, 0};
      PopTrajectory traj = popem_trajectory(v, s0, star, pop_w1_star, pop_nodes, pop_max_iter, pop_tol);
      Sink out(pop_c.out);
      (*out).precision(pop_c.pretty ? 8 : 17);
      write_trajectory_csv(*out, v, traj, star, pop_w1_star);
      return kExitOk;
    }
    if (*fixed) {
      announce("fixed-points", 0, false);
      PopulationMap pm(fp_star, fp_w1, fp_nodes);
      auto fps = enumerate_fixed_points([&](double t) { return pm.H(t); }, -fp_star - 5, fp_star + 5);
      Sink out(fp_c.out);
      if (fp_c.pretty) {
        *out << fps.size() << " fixed point(s) of H at theta*=" << fp_star << ", w1*=" << fp_w1 << '\n';
        for (const auto& f : fps)
          *out << "  " << fmt(f.location) << "  " << to_string(f.stability) << "  slope " << fmt(f.derivative) << '\n';
      } else {
        CsvWriter csv(*out);
        csv.row({"location", "stability", "derivative"});
        for (const auto& f : fps) csv.row({fmt(f.location), to_string(f.stability), fmt(f.derivative)});
      }
      return kExitOk;
    }
    if (*bif) {
      announce("bifurcation", 0, false);
      double t = bifurcation_threshold_H(bif_star, bif_tol);
      if (!bif_scan.empty()) {
        std::ofstream scan(bif_scan, std::ios::binary);
        if (!scan) throw Error("cannot write " + bif_scan);
        CsvWriter csv(scan);
        csv.row({"w1_star", "fixed_point_count", "locations"});
        for (int i = 0; i < bif_scan_points; ++i) {
          double w = 0.5 + 0.499 * i / (bif_scan_points - 1);
          PopulationMap pm(bif_star, w);
          auto fps = enumerate_fixed_points([&](double x) { return pm.H(x); }, -bif_star - 5, bif_star + 5);
          std::string locs;
          for (std::size_t k = 0; k < fps.size(); ++k) locs += (k ? ";" : "") + fmt(fps[k].location);
          csv.row({fmt(w), std::to_string(fps.size()), locs});
        }
      }
      Sink out(bif_c.out);
      if (bif_c.pretty) *out << "bifurcation threshold for theta*=" << bif_star << ": w1* = " << fmt(t) << '\n';
      else *out << "{\"theta_star\":" << fmt(bif_star) << ",\"threshold\":" << fmt(t) << "}\n";
      return kExitOk;
    }
    if (*land) {
      announce("landscape", 0, false);
      SymmetricTruth truth{parse_vector(land_star, "--theta-star"), land_w1};
      if (truth.theta_star.size() > 2) throw CLI::ValidationError("--theta-star", "d must be 1 or 2");
      if (!land_raster.empty()) {
        std::ofstream r(land_raster, std::ios::binary);
        if (!r) throw Error("cannot write " + land_raster);
        write_landscape_raster(r, truth, land_raster_grid);
      }
      auto pts = scan_stationary_points(truth, land_grid);
      Sink out(land_c.out);
      CsvWriter csv(*out);
      csv.row({"theta", "w1", "gradient_norm", "classification"});
      for (const auto& p : pts) {
        std::string th;
        for (int i = 0; i < p.theta.size(); ++i) th += (i ? ";" : "") + fmt(p.theta(i));
        csv.row({th, fmt(p.w1), fmt(p.gradient_norm), to_string(p.classification)});
      }
      return kExitOk;
    }
    if (*verify) {
      announce("verify", 0, false);
      PopulationMap pm(ver_star, ver_w1);
      ReferenceCurve curve{ver_star, ver_w1, ver_eps, ver_delta};
      C2Report rep = verify_c2(curve, pm, ver_grid);
      if (!rep.all_pass() && ver_search) {
        if (auto adj = search_adjusted_curve(ver_star, ver_w1, ver_grid)) {
          curve = *adj;
          rep = verify_c2(curve, pm, ver_grid);
          std::cerr << "adjusted curve: epsilon=" << curve.epsilon << " delta=" << curve.delta << '\n';
        }
      }
      Sink out(ver_c.out);
      std::string js = to_json(rep);
      *out << (ver_c.pretty ? nlohmann::json::parse(js).dump(2) : js) << '\n';
      return rep.all_pass() ? kExitOk : kExitCheckFailed;
    }
    if (*reproduce) {
      announce("reproduce", rep_c.seed, true);
      std::cerr << "dataset mode: " << rep_dataset << "; n = inf cells use quadrature population EM\n";
      TableId id = *parse_table_id(rep_table);
      std::optional<int> trials;
      if (rep_trials > 0) trials = rep_trials;
      const DatasetMode mode = rep_dataset == "shared" ? DatasetMode::Shared : DatasetMode::FreshPerTrial;
      TableReport report = reproduce_table(id, trials, rep_c.seed, rep_c.jobs, mode, [&](const TableRow& r) {
        if (!rep_c.pretty) return;
        std::cerr << r.cell << ' ' << r.model << ": " << r.p_hat << " [" << r.ci_lo << ", " << r.ci_hi
                  << "] reference " << r.paper_value << (r.pass ? "" : r.gating ? "  MISS" : "  advisory") << '\n';
      });
      Sink out(rep_c.out);
      write_table_csv(*out, report);
      return report.gating_pass() ? kExitOk : kExitCheckFailed;
    }
    if (*track) {
      announce("track", tr_c.seed, true);
      Vector star = parse_vector(tr_star, "--theta-star");
      TrackingReport rep = track_finite_vs_population(star, tr_w1, tr_n, tr_horizon, tr_seeds, tr_c.seed, tr_c.jobs);
      nlohmann::json j{{"n", rep.n}, {"horizon", rep.horizon}, {"median", rep.median},
                       {"max", rep.max}, {"sup_deviation", rep.sup_deviation}};
      Sink out(tr_c.out);
      *out << j.dump(tr_c.pretty ? 2 : -1) << '\n';
      return kExitOk;
    }
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitCheckFailed;
  }
  return kExitUsage;
}
