#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "qproc/config.hpp"
#include "qproc/diagnostics.hpp"
#include "qproc/estimator.hpp"
#include "qproc/levy.hpp"
#include "qproc/path.hpp"
#include "qproc/quasi.hpp"
#include "qproc/rng.hpp"

namespace qproc {

inline constexpr char kLibraryVersion[] = "1.0.0";
inline constexpr char kArtifactFormatVersion[] = "1";

namespace detail {

inline std::string fnv1a_hex(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    throw parameter_error("cannot create output directory: " + dir.string());
}

inline std::ofstream open_out(const std::filesystem::path& file) {
  std::ofstream os(file);
  if (!os) throw parameter_error("cannot open for writing: " + file.string());
  os.precision(17);
  return os;
}

// Compact numeric tag for file/dir names: 0.05 -> "0.05", 10 -> "10".
inline std::string num_tag(double v) {
  std::ostringstream ss;
  ss << v;
  return ss.str();
}

inline void write_manifest(const std::filesystem::path& dir, const ExperimentConfig& cfg,
                           const std::string& experiment) {
  json m;
  m["experiment"] = experiment;
  m["config_hash"] = fnv1a_hex(serialize_config(cfg));
  m["seeds"] = cfg.seeds;
  m["versions"] = {{"library", kLibraryVersion},
                   {"generator", RngStream::kGeneratorId},
                   {"artifact_format", kArtifactFormatVersion}};
  open_out(dir / "manifest.json") << m.dump(2) << "\n";
}

// Long-format metric rows: (experiment, h, T, alpha, seed, metric, value).
class MetricTable {
 public:
  void add(const std::string& experiment, double h, double T, std::size_t alpha,
           std::uint64_t seed, const std::string& metric, double value) {
    std::ostringstream row;
    row.precision(17);
    row << experiment << ',' << h << ',' << T << ',' << alpha << ',' << seed << ',' << metric
        << ',' << value << '\n';
    rows_.push_back(row.str());
  }

  void write(const std::filesystem::path& file) const {
    auto os = open_out(file);
    os << "experiment,h,T,alpha,seed,metric,value\n";
    for (const auto& r : rows_) os << r;
  }

 private:
  std::vector<std::string> rows_;
};

// Fixed-size pool over independent tasks; results land in task-owned slots,
// so output is independent of the interleaving.
inline void run_parallel(std::vector<std::function<void()>>& tasks, std::size_t jobs) {
  if (jobs <= 1 || tasks.size() <= 1) {
    for (auto& t : tasks) t();
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  const std::size_t workers = std::min(jobs, tasks.size());
  std::exception_ptr error;
  std::mutex error_mutex;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= tasks.size()) return;
        try {
          tasks[i]();
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

inline void emit_plot_script(const std::filesystem::path& dir, const std::string& body) {
  auto os = open_out(dir / "plot.py");
  os << "#!/usr/bin/env python3\n"
     << "\"\"\"Plot the CSV artifacts in this directory (requires matplotlib).\"\"\"\n"
     << "import csv, glob, os\n"
     << "import matplotlib\n"
     << "matplotlib.use(\"Agg\")\n"
     << "import matplotlib.pyplot as plt\n\n"
     << "HERE = os.path.dirname(os.path.abspath(__file__))\n\n"
     << body;
}

inline std::vector<SamplingScheme> figure_cells(const ExperimentConfig& cfg,
                                                std::initializer_list<double> horizons,
                                                std::initializer_list<double> spacings) {
  if (!cfg.scheme.explicit_cells.empty()) return cfg.scheme.explicit_cells;
  std::vector<SamplingScheme> cells;
  for (double T : horizons)
    for (double h : spacings)
      cells.push_back(SamplingScheme{static_cast<std::size_t>(std::llround(T / h)), h});
  return cells;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Quasi-path fan plots: one observed path per (T, h) cell plus alpha quasi
// paths over the same increments.
// ---------------------------------------------------------------------------

inline void run_paths_experiment(const ExperimentConfig& cfg, std::size_t jobs = 1) {
  cfg.validate_or_throw();
  namespace fs = std::filesystem;
  const fs::path root = fs::path(cfg.output_dir) / "paths";
  detail::ensure_dir(root);

  const auto cells = detail::figure_cells(cfg, {10.0, 50.0, 100.0}, {1.0, 0.1, 0.05, 0.005});
  const std::size_t alpha = cfg.alpha.values.empty() ? 100 : cfg.alpha.values.front();
  const std::uint64_t seed = cfg.seeds.front();

  std::vector<std::function<void()>> tasks;
  for (const auto& cell : cells)
    tasks.push_back([&, cell] {
      const fs::path dir =
          root / ("cell_T" + detail::num_tag(cell.horizon()) + "_h" + detail::num_tag(cell.h));
      detail::ensure_dir(dir);
      RngStream rng(seed, 0);
      const IncrementVector inc = simulate_increments(cfg.model, cell, rng);
      RngStream perm_rng(seed, 1);
      QuasiEnsemble ens(inc, cfg.model.u0, cell.h,
                        sample_permutation_set(cell.n, alpha, perm_rng));
      {
        auto os = detail::open_out(dir / "observed.csv");
        write_csv(ens.observed_path(), os);
      }
      for (std::size_t a = 0; a < alpha; ++a) {
        char name[32];
        std::snprintf(name, sizeof name, "quasi_%04zu.csv", a);
        auto os = detail::open_out(dir / name);
        write_csv(ens.quasi_path(a), os);
      }
    });
  detail::run_parallel(tasks, jobs);

  detail::write_manifest(root, cfg, "paths");
  detail::emit_plot_script(
      root,
      "def load(path):\n"
      "    with open(path) as f:\n"
      "        rows = list(csv.DictReader(f))\n"
      "    return [float(r[\"t\"]) for r in rows], [float(r[\"value\"]) for r in rows]\n\n"
      "for cell in sorted(glob.glob(os.path.join(HERE, \"cell_*\"))):\n"
      "    fig, ax = plt.subplots(figsize=(7, 4))\n"
      "    for q in sorted(glob.glob(os.path.join(cell, \"quasi_*.csv\"))):\n"
      "        t, v = load(q)\n"
      "        ax.step(t, v, where=\"post\", color=\"0.6\", lw=0.4)\n"
      "    t, v = load(os.path.join(cell, \"observed.csv\"))\n"
      "    ax.step(t, v, where=\"post\", color=\"black\", lw=1.2)\n"
      "    ax.set_title(os.path.basename(cell))\n"
      "    fig.savefig(cell + \".png\", dpi=150)\n"
      "    plt.close(fig)\n");
}

// ---------------------------------------------------------------------------
// Marginal-law comparison at t = 1: KDE curves and KS table per (T, h) cell.
// ---------------------------------------------------------------------------

inline void run_marginal_experiment(const ExperimentConfig& cfg, std::size_t jobs = 1) {
  cfg.validate_or_throw();
  namespace fs = std::filesystem;
  const fs::path root = fs::path(cfg.output_dir) / "marginals";
  detail::ensure_dir(root);

  const auto cells = detail::figure_cells(cfg, {10.0, 50.0, 100.0}, {1.0, 0.01, 0.005});
  const std::size_t alpha = cfg.alpha.values.empty() ? 1000 : cfg.alpha.values.front();
  const std::size_t oracle_B = std::min<std::size_t>(cfg.oracle.paths, 1000);
  const double t = 1.0;

  struct CellOut {
    SamplingScheme cell;
    std::uint64_t seed;
    double ks = 0.0;
    KdeResult quasi_kde, oracle_kde;
  };
  std::vector<CellOut> results;
  for (const auto& cell : cells)
    for (std::uint64_t seed : cfg.seeds) results.push_back({cell, seed, 0.0, {}, {}});

  std::vector<std::function<void()>> tasks;
  for (auto& out : results)
    tasks.push_back([&cfg, &out, alpha, oracle_B, t] {
      const SamplingScheme& cell = out.cell;
      RngStream rng(out.seed, 0);
      const IncrementVector inc = simulate_increments(cfg.model, cell, rng);
      RngStream perm_rng(out.seed, 1);
      const auto perms = sample_permutation_set(cell.n, alpha, perm_rng);
      const auto steps =
          std::min<std::size_t>(cell.n, static_cast<std::size_t>(std::floor(t / cell.h)));
      std::vector<double> quasi_vals(alpha);
      for (std::size_t a = 0; a < alpha; ++a) {
        double v = cfg.model.u0;
        for (std::size_t k = 0; k < steps; ++k) v += inc[perms[a].mapping[k]];
        quasi_vals[a] = v;
      }
      std::vector<double> oracle_vals(oracle_B);
      for (std::size_t b = 0; b < oracle_B; ++b) {
        RngStream orng(out.seed + 1, b);
        oracle_vals[b] = cfg.model.u0 + simulate_one_increment(cfg.model, t, orng);
      }
      out.ks = ks_statistic(quasi_vals, oracle_vals);
      out.quasi_kde = kde(quasi_vals);
      out.oracle_kde = kde(oracle_vals);
    });
  detail::run_parallel(tasks, jobs);

  detail::MetricTable table;
  for (const auto& out : results) {
    table.add("marginals", out.cell.h, out.cell.horizon(), alpha, out.seed, "ks_t1", out.ks);
    const fs::path dir = root / ("cell_T" + detail::num_tag(out.cell.horizon()) + "_h" +
                                 detail::num_tag(out.cell.h));
    detail::ensure_dir(dir);
    auto os = detail::open_out(dir / ("kde_seed" + std::to_string(out.seed) + ".csv"));
    os << "x,quasi_density,oracle_x,oracle_density\n";
    const std::size_t G = out.quasi_kde.grid.size();
    for (std::size_t g = 0; g < G; ++g)
      os << out.quasi_kde.grid[g] << ',' << out.quasi_kde.density[g] << ','
         << out.oracle_kde.grid[g] << ',' << out.oracle_kde.density[g] << '\n';
  }
  table.write(root / "ks_table.csv");
  detail::write_manifest(root, cfg, "marginals");
  detail::emit_plot_script(
      root,
      "for f in sorted(glob.glob(os.path.join(HERE, \"cell_*\", \"kde_*.csv\"))):\n"
      "    with open(f) as fh:\n"
      "        rows = list(csv.DictReader(fh))\n"
      "    fig, ax = plt.subplots(figsize=(6, 4))\n"
      "    ax.plot([float(r[\"x\"]) for r in rows],\n"
      "            [float(r[\"quasi_density\"]) for r in rows], label=\"quasi\")\n"
      "    ax.plot([float(r[\"oracle_x\"]) for r in rows],\n"
      "            [float(r[\"oracle_density\"]) for r in rows], label=\"oracle\")\n"
      "    ax.legend()\n"
      "    ax.set_title(os.path.relpath(f, HERE))\n"
      "    fig.savefig(f[:-4] + \".png\", dpi=150)\n"
      "    plt.close(fig)\n");
}

// ---------------------------------------------------------------------------
// Estimation experiment: oracle theta_0, then theta_hat per (n, seed) with
// error table, standardized QQ data and the sandwich covariance.
// ---------------------------------------------------------------------------

struct EstimationRun {
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::size_t alpha = 0;
  double theta_hat = 0.0;
  double contrast = 0.0;
  double sigma = std::numeric_limits<double>::quiet_NaN();  // sandwich (d = 1)
};

struct EstimationSummary {
  double theta0 = 0.0;
  double identifiability_margin = 0.0;
  std::vector<EstimationRun> runs;
  std::vector<std::pair<std::size_t, double>> median_abs_error;  // per n
};

inline EstimationSummary run_estimation_experiment(const ExperimentConfig& cfg,
                                                   std::size_t jobs = 1) {
  cfg.validate_or_throw();
  if (cfg.theta.dim() != 1)
    throw parameter_error("estimation experiment: only 1-d theta is orchestrated");
  namespace fs = std::filesystem;
  const fs::path root = fs::path(cfg.output_dir) / "estimation";
  detail::ensure_dir(root);

  const auto functional = cfg.functional.build(cfg.theta);
  EstimationSummary summary;

  // (i) oracle theta_0 on a dense grid, with identifiability margin check
  {
    OptimizerOptions oracle_opts = cfg.optimizer;
    oracle_opts.grid_points = cfg.oracle.grid_points;
    const EstimatorResult oracle = oracle_estimate(cfg.model, cfg.oracle.scheme(), *functional,
                                                   cfg.theta, cfg.oracle.paths, cfg.oracle.seed,
                                                   oracle_opts);
    summary.theta0 = oracle.theta_hat[0];
    std::vector<double> grid, contrast;
    for (const auto& e : oracle.trace) {
      grid.push_back(e.theta[0]);
      contrast.push_back(e.contrast);
    }
    summary.identifiability_margin =
        identifiability_margin(grid, contrast, cfg.identifiability.radius);
    if (summary.identifiability_margin < cfg.identifiability.min_margin) {
      std::cerr << "warning: identifiability margin " << summary.identifiability_margin
                << " below required " << cfg.identifiability.min_margin << "\n";
      if (!cfg.identifiability.continue_on_failure)
        throw numeric_error("identifiability margin too small",
                            summary.identifiability_margin);
    }
  }

  // (ii) theta_hat per (n, seed)
  std::vector<EstimationRun> runs;
  for (const auto& cell : cfg.scheme.cells())
    for (std::uint64_t seed : cfg.seeds)
      runs.push_back({cell.n, seed, cfg.alpha_for(cell.n), 0.0, 0.0,
                      std::numeric_limits<double>::quiet_NaN()});

  std::vector<std::function<void()>> tasks;
  for (auto& run : runs)
    tasks.push_back([&cfg, &functional, &run] {
      const SamplingScheme cell =
          cfg.scheme.uses_beta() ? SamplingScheme::hflt(run.n, cfg.scheme.beta)
                                 : *std::find_if(cfg.scheme.explicit_cells.begin(),
                                                 cfg.scheme.explicit_cells.end(),
                                                 [&](const auto& c) { return c.n == run.n; });
      RngStream rng(run.seed, 0);
      const IncrementVector inc = simulate_increments(cfg.model, cell, rng);
      RngStream perm_rng(run.seed, 1);
      QuasiEnsemble ens(inc, cfg.model.u0, cell.h,
                        sample_permutation_set(cell.n, run.alpha, perm_rng));
      ContrastProblem prob{&ens, functional.get(), cfg.theta};
      OptimizerOptions opts = cfg.optimizer;
      opts.keep_trace = false;
      const EstimatorResult res = minimize_contrast(prob, opts);
      run.theta_hat = res.theta_hat[0];
      run.contrast = res.contrast_at_min;
      if (functional->has_derivatives()) {
        try {
          run.sigma = sandwich_covariance(prob, res.theta_hat)[0];
        } catch (const degeneracy_error&) {
          // keep NaN: flat Hessian at the minimizer for this replication
        }
      }
    });
  detail::run_parallel(tasks, jobs);
  summary.runs = runs;

  // (iii) summaries
  {
    auto os = detail::open_out(root / "estimates.csv");
    os << "n,seed,alpha,theta_hat,contrast,sigma_sandwich\n";
    for (const auto& r : runs)
      os << r.n << ',' << r.seed << ',' << r.alpha << ',' << r.theta_hat << ',' << r.contrast
         << ',' << r.sigma << '\n';
  }
  {
    auto os = detail::open_out(root / "summary.csv");
    os << "n,alpha,median_abs_error,theta0\n";
    for (const auto& cell : cfg.scheme.cells()) {
      std::vector<double> errs;
      for (const auto& r : runs)
        if (r.n == cell.n) errs.push_back(std::abs(r.theta_hat - summary.theta0));
      const double med = median(errs);
      summary.median_abs_error.emplace_back(cell.n, med);
      os << cell.n << ',' << cfg.alpha_for(cell.n) << ',' << med << ',' << summary.theta0
         << '\n';
    }
  }
  {
    // standardized QQ data per n: sorted (theta_hat - median)/MAD vs normal quantiles
    auto os = detail::open_out(root / "qq.csv");
    os << "n,standardized,normal_quantile\n";
    for (const auto& cell : cfg.scheme.cells()) {
      std::vector<double> est;
      for (const auto& r : runs)
        if (r.n == cell.n) est.push_back(r.theta_hat);
      if (est.size() < 3) continue;
      const double med = median(est);
      std::vector<double> dev;
      for (double e : est) dev.push_back(std::abs(e - med));
      const double mad = median(dev);
      if (mad <= 0.0) continue;
      std::sort(est.begin(), est.end());
      const auto R = est.size();
      for (std::size_t i = 0; i < R; ++i)
        os << cell.n << ',' << (est[i] - med) / mad << ','
           << normal_quantile((static_cast<double>(i) + 0.5) / static_cast<double>(R)) << '\n';
    }
  }
  detail::write_manifest(root, cfg, "estimation");
  detail::emit_plot_script(
      root,
      "with open(os.path.join(HERE, \"summary.csv\")) as f:\n"
      "    rows = list(csv.DictReader(f))\n"
      "fig, ax = plt.subplots(figsize=(6, 4))\n"
      "ax.loglog([int(r[\"n\"]) for r in rows],\n"
      "          [float(r[\"median_abs_error\"]) for r in rows], \"o-\")\n"
      "ax.set_xlabel(\"n\")\n"
      "ax.set_ylabel(\"median |theta_hat - theta0|\")\n"
      "fig.savefig(os.path.join(HERE, \"consistency.png\"), dpi=150)\n"
      "plt.close(fig)\n"
      "with open(os.path.join(HERE, \"qq.csv\")) as f:\n"
      "    rows = list(csv.DictReader(f))\n"
      "for n in sorted({r[\"n\"] for r in rows}, key=int):\n"
      "    pts = [r for r in rows if r[\"n\"] == n]\n"
      "    fig, ax = plt.subplots(figsize=(4, 4))\n"
      "    ax.plot([float(r[\"normal_quantile\"]) for r in pts],\n"
      "            [float(r[\"standardized\"]) for r in pts], \".\")\n"
      "    ax.set_title(\"QQ, n=\" + n)\n"
      "    fig.savefig(os.path.join(HERE, \"qq_n\" + n + \".png\"), dpi=150)\n"
      "    plt.close(fig)\n");
  return summary;
}

}  // namespace qproc
