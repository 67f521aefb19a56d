// Acceptance run: one PASS/FAIL line per criterion on stdout, details on stderr.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "overem/experiments.hpp"
#include "overem/fixedpoint.hpp"
#include "overem/landscape.hpp"
#include "overem/population.hpp"

using namespace overem;

namespace {

// Pinned tolerances and budgets.
constexpr double kBifurcationLo = 0.75, kBifurcationHi = 0.79;
constexpr double kThetaWrongMatch = 1e-8;
constexpr double kPopError = 1e-7;
constexpr int kPopIterations = 500;
constexpr double kAngleFloor = 1e-10;     // angles below this are round-off
constexpr double kWeightSlack = 1e-12;    // w stays on its side of 1/2 up to this
constexpr double kLyapunovStop = 1e-9;    // certificate checked until this close to the truth
constexpr double kEigenCeiling = 1 - 1e-4;
constexpr double kBallRadius = 0.05;
constexpr double kTailFloor = 1e-8;       // contraction ratios measured above this distance
constexpr double kHessianFd = 1e-4;
constexpr double kWeightResidual = 1e-3;
constexpr double kBoundMargin = 1e-8;
constexpr double kMcSigmas = 3.0;
constexpr std::size_t kMcSamples = 10'000'000;
constexpr double kNodeAgreement = 1e-9;
constexpr double kTrackConstant = 5.0;
constexpr double kBudget1 = 5, kBudget2 = 1, kBudget3 = 60, kBudget6 = 30, kBudget8 = 1800, kBudget9 = 300;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(int id, bool ok, const std::string& summary) {
  std::cout << "criterion " << id << ": " << (ok ? "PASS" : "FAIL") << "  " << summary << std::endl;
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// ---------------------------------------------------------------- criteria 1, 2

void criterion1() {
  auto t0 = Clock::now();
  int c7 = count_fixed_points_H(1.0, 0.7), c9 = count_fixed_points_H(1.0, 0.9);
  double b = bifurcation_threshold_H(1.0);
  double dt = seconds_since(t0);
  bool ok = c7 == 3 && c9 == 1 && b >= kBifurcationLo && b <= kBifurcationHi && dt < kBudget1;
  report(1, ok,
         "fixed points " + std::to_string(c7) + "/" + std::to_string(c9) + ", threshold " + fmt("%.4f", b) +
             ", " + fmt("%.2f s", dt));
}

void criterion2() {
  auto t0 = Clock::now();
  Vector star(1), init(1);
  star << 1.0;
  init << -1.5;
  auto tr = popem_trajectory(PopVariant::EM1, PopState{init, 0.52, 0}, star, 0.52);
  double end = tr.states.back().theta(0);
  double dt = seconds_since(t0);
  auto tw = theta_wrong(1.0, 0.52);
  double gap = tw ? std::abs(end - tw->location) : INFINITY;
  bool ok = end > -1 && end < 0 && gap < kThetaWrongMatch && dt < kBudget2;
  report(2, ok, "limit " + fmt("%.10f", end) + ", |limit - theta_wrong| " + fmt("%.1e", gap) + ", " +
                    fmt("%.2f s", dt));
}

// ---------------------------------------------------------------- criteria 3, 4, 5

struct GridRun {
  double ts, ws;
  int d;
  PopTrajectory traj;
  Vector star;
  double side;  // sign of <theta0, theta*>
};

const double kStars[] = {0.5, 1, 2, 4, 8};
const double kWeights[] = {0.5, 0.7, 0.9};

std::vector<GridRun> grid_runs;

Vector random_unit(std::mt19937_64& eng, int d) {
  std::normal_distribution<double> z;
  Vector v(d);
  do {
    for (int i = 0; i < d; ++i) v(i) = z(eng);
  } while (v.norm() == 0);
  return v.normalized();
}

void criterion3() {
  auto t0 = Clock::now();
  std::mt19937_64 eng(2024);
  int bad_error = 0, bad_angle = 0, bad_weight = 0, runs = 0, worst_iter = 0;
  for (double ts : kStars)
    for (double ws : kWeights)
      for (int r = 0; r < 20; ++r) {
        const int d = 1 + r % 3;
        Vector star = ts * random_unit(eng, d);
        Vector th0;
        do {
          th0 = random_unit(eng, d) * std::uniform_real_distribution<double>(0.1, 2 * ts + 1)(eng);
        } while (th0.dot(star) == 0.0);
        GridRun g{ts, ws, d, {}, star, th0.dot(star) > 0 ? 1.0 : -1.0};
        g.traj = popem_trajectory(PopVariant::EM2, PopState{th0, 0.5, 0}, star, ws, 150, kPopIterations, 1e-13);
        ++runs;

        int hit = -1;
        for (std::size_t t = 0; t < g.traj.states.size(); ++t)
          if (distance_to_truth(PopVariant::EM2, g.traj.states[t], star, ws) < kPopError) {
            hit = int(t);
            break;
          }
        if (hit < 0) ++bad_error;
        worst_iter = std::max(worst_iter, hit < 0 ? kPopIterations + 1 : hit);

        const Vector target = g.side * star;
        for (std::size_t t = 1; t < g.traj.states.size(); ++t) {
          const auto& a = g.traj.states[t - 1];
          const auto& b = g.traj.states[t];
          double ba = angle_between(a.theta, target), bb = angle_between(b.theta, target);
          if (d > 1 && ba > kAngleFloor && !(bb < ba)) {
            std::cerr << "  criterion 3: angle " << ba << " -> " << bb << " at t = " << t << ", theta* " << ts
                      << ", w1* " << ws << ", d " << d << "\n";
            ++bad_angle;
            break;
          }
          bool w_ok = g.side > 0 ? b.w1 >= 0.5 - kWeightSlack && b.w1 < 1 : b.w1 <= 0.5 + kWeightSlack && b.w1 > 0;
          if (!w_ok || !(b.theta.dot(star) * g.side > 0)) {
            ++bad_weight;
            break;
          }
        }
        grid_runs.push_back(std::move(g));
      }
  double dt = seconds_since(t0);
  std::cerr << "  criterion 3: " << runs << " trajectories, slowest reached 1e-7 after " << worst_iter
            << " iterations\n";
  bool ok = bad_error == 0 && bad_angle == 0 && bad_weight == 0 && dt < kBudget3;
  report(3, ok,
         std::to_string(runs) + " runs, misses " + std::to_string(bad_error) + ", angle violations " +
             std::to_string(bad_angle) + ", confinement violations " + std::to_string(bad_weight) + ", " +
             fmt("%.1f s", dt));
}

void criterion4() {
  int checked = 0, bad_m = 0, bad_nest = 0;
  for (const auto& g : grid_runs) {
    if (g.d != 1 || g.ws <= 0.5) continue;
    ReferenceCurve curve{g.ts, g.ws, 0, 0};
    // mirror trajectories that head to (-theta*, w2*)
    auto to_s = [&](const PopState& s) { return std::pair{g.side * s.theta(0) * (g.star(0) > 0 ? 1 : -1),
                                                           g.side > 0 ? s.w1 : 1 - s.w1}; };
    ++checked;
    const auto& st = g.traj.states;
    for (std::size_t t = 1; t + 1 < st.size(); ++t) {
      auto [th, w] = to_s(st[t]);
      auto [tn, wn] = to_s(st[t + 1]);
      if (std::hypot(tn - g.ts, wn - g.ws) < kLyapunovStop) break;
      auto cur = classify_region(th, w, curve);
      auto next = classify_region(tn, wn, curve);
      if (!(next.m_value < cur.m_value)) {
        ++bad_m;
        break;
      }
      if (!cur.rectangle.strictly_contains(tn, wn)) {
        ++bad_nest;
        break;
      }
    }
  }
  report(4, checked > 0 && bad_m == 0 && bad_nest == 0,
         std::to_string(checked) + " one-dimensional trajectories, m increases " + std::to_string(bad_m) +
             ", nesting failures " + std::to_string(bad_nest));
}

void criterion5() {
  double lo = INFINITY, hi = -INFINITY;
  for (double ts : kStars)
    for (double ws : kWeights) {
      auto J = jacobian_at_truth(PopulationMap(ts, ws));
      lo = std::min(lo, J.eigenvalues[0]);
      hi = std::max(hi, J.eigenvalues[1]);
    }
  double rho = 0;
  int measured = 0, never = 0;
  for (const auto& g : grid_runs) {
    bool inside = false, any = false;
    for (std::size_t t = 1; t < g.traj.states.size(); ++t) {
      double a = distance_to_truth(PopVariant::EM2, g.traj.states[t - 1], g.star, g.ws);
      double b = distance_to_truth(PopVariant::EM2, g.traj.states[t], g.star, g.ws);
      if (a < kBallRadius) inside = true;
      if (inside && a > kTailFloor) {
        rho = std::max(rho, b / a);
        any = true;
      }
    }
    if (any) ++measured;
    if (!inside) ++never;
  }
  bool ok = lo >= 0 && hi <= kEigenCeiling && rho < 1 && never == 0;
  report(5, ok,
         "eigenvalues in [" + fmt("%.4f", lo) + ", " + fmt("%.6f", hi) + "], tail factor max " + fmt("%.4f", rho) +
             " over " + std::to_string(measured) + " trajectories");
}

// ---------------------------------------------------------------- criteria 6, 7

void criterion6() {
  auto t0 = Clock::now();
  Vector star(1);
  star << 1.0;
  SymmetricTruth truth{star, 0.7};
  std::vector<StationaryReport> pts;
  for (const auto& p : scan_stationary_points(truth))
    if (p.classification != StationaryKind::NotStationary) pts.push_back(p);
  auto has = [&](double th, double w) {
    return std::count_if(pts.begin(), pts.end(), [&](const StationaryReport& p) {
             return std::abs(p.theta(0) - th) < 1e-6 && std::abs(p.w1 - w) < 1e-6;
           }) == 1;
  };
  bool set_ok = pts.size() == 3 && has(1, 0.7) && has(-1, 0.3) && has(0, 0.5);

  auto h = hessian_at_origin(truth);
  Eigen::SelfAdjointEigenSolver<Matrix> es(h.closed_form);
  bool mixed = es.eigenvalues().minCoeff() < 0 && es.eigenvalues().maxCoeff() > 0;
  double fd_gap = (h.finite_difference - h.closed_form).cwiseAbs().maxCoeff();

  auto tw = theta_wrong(1.0, 0.52);
  Vector twv(1);
  twv << (tw ? tw->location : 0.0);
  double wres = tw ? std::abs(pop_grad(twv, 0.52, SymmetricTruth{star, 0.52}).weight) : 0.0;
  double dt = seconds_since(t0);
  bool ok = set_ok && mixed && fd_gap < kHessianFd && wres > kWeightResidual && dt < kBudget6;
  report(6, ok,
         std::to_string(pts.size()) + " stationary points, Hessian gap " + fmt("%.1e", fd_gap) +
             ", weight residual at theta_wrong " + fmt("%.4f", wres) + ", " + fmt("%.1f s", dt));
}

void criterion7() {
  double worst_slope = -INFINITY, worst_bound = -INFINITY;
  const double h = 1e-5;
  for (double ts : {0.5, 1.0, 2.0, 4.0})
    for (double ws : {0.52, 0.7, 0.9}) {
      PopulationMap pm(ts, ws);
      for (double th = ts; th <= ts + 6; th += 0.05) {
        double d = (pm.H(th + h) - pm.H(th - h)) / (2 * h);
        worst_slope = std::max(worst_slope, d - std::exp(-ts * ts / 2));
      }
      for (double th = -8; th <= 8; th += 0.1)
        for (int i = 0; i <= 20; ++i) {
          double g = pm.Gtheta(th, i / 20.0);
          worst_bound = std::max(worst_bound, g * g - (1 + ts * ts));
        }
    }
  PopulationMap pm(1.0, 0.7);
  auto rep = verify_c2(ReferenceCurve{1.0, 0.7, 0.05, 0.05}, pm, 100);
  double m = std::min({rep.min_margin("c2b_raw"), rep.min_margin("c2c2c_v3"), rep.min_margin("c2c2c_v4")});
  bool ok = worst_slope <= 0 && worst_bound <= 0 && m > kBoundMargin;
  report(7, ok,
         "max(dH - bound) " + fmt("%.2e", worst_slope) + ", max(G^2 - bound) " + fmt("%.2e", worst_bound) +
             ", inequality margin " + fmt("%.2e", m));
}

// ---------------------------------------------------------------- criterion 8

void criterion8(const std::string& csv_path) {
  auto t0 = Clock::now();
  TableReport all;
  auto log_row = [](const TableRow& r) {
    std::cerr << "  " << r.table << " " << r.cell << " " << r.model << ": " << fmt("%.3f", r.p_hat) << " ["
              << fmt("%.3f", r.ci_lo) << ", " << fmt("%.3f", r.ci_hi) << "] reference " << fmt("%.3f", r.paper_value)
              << (r.pass ? " ok" : (r.gating ? " MISS" : " advisory")) << "\n";
  };
  for (TableId t : {TableId::Full2G, TableId::Cases, TableId::P3Table}) {
    auto rep = reproduce_table(t, std::nullopt, 1, 0, DatasetMode::FreshPerTrial, log_row);
    all.rows.insert(all.rows.end(), rep.rows.begin(), rep.rows.end());
  }
  std::ofstream out(csv_path);
  write_table_csv(out, all);
  int pass = 0, advisory = 0, miss = 0;
  for (const auto& r : all.rows) (r.pass ? pass : (r.gating ? miss : advisory))++;
  double dt = seconds_since(t0);
  bool ok = all.gating_pass() && dt < kBudget8;
  report(8, ok,
         std::to_string(all.rows.size()) + " cells: " + std::to_string(pass) + " match, " +
             std::to_string(advisory) + " advisory, " + std::to_string(miss) + " gating misses, " +
             fmt("%.0f s", dt) + " (rows in " + csv_path + ")");
}

// ---------------------------------------------------------------- criteria 9, 10

void criterion9() {
  auto t0 = Clock::now();
  Vector star(1);
  star << 1.0;
  std::vector<double> medians;
  const std::size_t ns[] = {10'000, 40'000, 160'000};
  for (std::size_t n : ns) {
    auto rep = track_finite_vs_population(star, 0.7, n, 50, 20, 9);
    medians.push_back(rep.median);
    std::cerr << "  criterion 9: n = " << n << " median " << rep.median << " max " << rep.max << "\n";
  }
  const double cap = kTrackConstant * std::sqrt(1.0 / 160'000);
  double dt = seconds_since(t0);
  bool ok = medians[0] > medians[1] && medians[1] > medians[2] && medians[2] <= cap && dt < kBudget9;
  report(9, ok,
         "medians " + fmt("%.5f", medians[0]) + " > " + fmt("%.5f", medians[1]) + " > " + fmt("%.5f", medians[2]) +
             ", cap " + fmt("%.5f", cap) + ", " + fmt("%.1f s", dt));
}

void criterion10() {
  std::mt19937_64 eng(31337);
  std::uniform_real_distribution<double> u01(0, 1);
  std::normal_distribution<double> z;
  double worst_z = 0, worst_nodes = 0;
  int outside = 0;
  for (int p = 0; p < 10; ++p) {
    const double ts = 0.3 + 2.7 * u01(eng), ws = 0.5 + 0.45 * u01(eng);
    const double th = 0.1 + 2.9 * u01(eng) * (u01(eng) < 0.3 ? -1 : 1);
    const double w = 0.05 + 0.9 * u01(eng);
    const double c = 0.5 * std::log(w / (1 - w)), cs = 0.5 * std::log(ws / (1 - ws));
    const double cH = cs;
    // functions: H, G_theta, G_w, s
    double sum[4] = {0, 0, 0, 0}, sq[4] = {0, 0, 0, 0};
    for (std::size_t i = 0; i < kMcSamples; ++i) {
      double y = (u01(eng) < ws ? ts : -ts) + z(eng);
      double tH = std::tanh(th * y + cH), t = std::tanh(th * y + c);
      double v[4] = {tH * y, t * y, 0.5 * (1 + t), std::tanh(std::abs(th) * y + c) * std::tanh(ts * y + cs)};
      for (int k = 0; k < 4; ++k) {
        sum[k] += v[k];
        sq[k] += v[k] * v[k];
      }
    }
    PopulationMap pm(ts, ws), pm40(ts, ws, 40);
    double got[4] = {pm.H(th), pm.Gtheta(th, w), pm.Gw(th, w), pm.s(std::abs(th), w)};
    double got40[4] = {pm40.H(th), pm40.Gtheta(th, w), pm40.Gw(th, w), pm40.s(std::abs(th), w)};
    for (int k = 0; k < 4; ++k) {
      double m = sum[k] / kMcSamples, se = std::sqrt((sq[k] / kMcSamples - m * m) / kMcSamples);
      double zz = std::abs(got[k] - m) / se;
      worst_z = std::max(worst_z, zz);
      if (zz > kMcSigmas) ++outside;
      if (zz > kMcSigmas)
        std::cerr << "  criterion 10: map " << k << " at theta* " << ts << ", w1* " << ws << ", theta " << th
                  << ", w1 " << w << ": " << got[k] << " vs " << m << " +- " << se << "\n";
      worst_nodes = std::max(worst_nodes, std::abs(got[k] - got40[k]));
    }
  }
  bool ok = outside == 0 && worst_nodes < kNodeAgreement;
  report(10, ok,
         "40 comparisons, worst " + fmt("%.2f", worst_z) + " standard errors, 40 vs 150 nodes " +
             fmt("%.1e", worst_nodes));
}

}  // namespace

// usage: acceptance [tables.csv] [criterion ...]
int main(int argc, char** argv) {
  const std::string csv = argc > 1 ? argv[1] : "acceptance_tables.csv";
  std::vector<int> only;
  for (int i = 2; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  std::cout << "overem " << version() << " acceptance" << std::endl;
  const std::vector<std::function<void()>> steps = {
      criterion1, criterion2, criterion3, criterion4, criterion5, criterion6, criterion7,
      [&] { criterion8(csv); }, criterion9, criterion10};
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (!only.empty() && std::find(only.begin(), only.end(), int(i + 1)) == only.end()) continue;
    try {
      steps[i]();
    } catch (const std::exception& e) {
      std::cout << "criterion error: " << e.what() << std::endl;
      ++failures;
    }
  }
  std::cout << (failures ? "FAILED criteria: " + std::to_string(failures) : std::string("all criteria passed"))
            << std::endl;
  return failures ? 1 : 0;
}
