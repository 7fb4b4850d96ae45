#include "quivernet/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "quivernet/approx.hpp"
#include "quivernet/errors.hpp"
#include "quivernet/io.hpp"
#include "quivernet/metrics.hpp"
#include "quivernet/topology.hpp"

namespace quivernet {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kSchemaVersion = 1;
bool quiet = false;

void log(const std::string& msg) {
  if (!quiet) std::cerr << "quivernet: " << msg << "\n";
}

json report_header(const RunConfig& cfg) {
  return json{{"schema_version", kSchemaVersion}, {"subcommand", cfg.subcommand}, {"seed", cfg.seed}};
}

void emit(const RunConfig& cfg, const json& report, const std::string& name = "report.json") {
  const std::string text = report.dump(2) + "\n";
  write_text_file((fs::path(cfg.out_dir) / name).string(), text);
  if (cfg.to_stdout) std::cout << text;
}

void write_timing(const RunConfig& cfg, double seconds) {
  json t{{"schema_version", kSchemaVersion}, {"wall_seconds", seconds}};
  write_text_file((fs::path(cfg.out_dir) / "timing.json").string(), t.dump(2) + "\n");
}

// --- verify ------------------------------------------------------------------

struct Worst {
  std::string name;
  double value;
  double tol;
  bool below;  // pass when value <= tol (or >= tol when false)
  bool pass() const { return below ? value <= tol : value >= tol; }
};

int run_verify(const RunConfig& cfg) {
  const QuiverFile qf = load_quiver_file(cfg.quiver_path);
  const Quiver& q = qf.quiver;
  Rng rng(cfg.seed);
  double min_h = std::numeric_limits<double>::infinity(), equiv = 0, gram = 0, level = 0;
  double level_min = std::numeric_limits<double>::infinity();
  double tail = 0;
  for (int k = 0; k < cfg.samples; ++k) {
    const FramedRep r = random_stable_rep<double>(q, qf.dims, rng);
    const MetricSet m = vertex_metrics(q, qf.dims, r);
    for (const Matrix& H : m.H) min_h = std::min(min_h, min_eigenvalue(H));
    equiv = std::max(equiv, equivariance_check(q, qf.dims, r, random_gauge<double>(qf.dims, rng)));
    gram = std::max(gram, gram_recursion_check(q, qf.dims, r, m));
    tail = std::max(tail, m.tail_bound);
    const FramedRep on = project_to_moment_level(q, qf.dims, r);
    level = std::max(level, moment_residual(q, qf.dims, on));
    const MetricSet mo = vertex_metrics(q, qf.dims, on);
    for (const Matrix& G : mo.gram)
      level_min = std::min(level_min, min_eigenvalue(Matrix(G - Matrix::Identity(G.rows(), G.cols()))));
  }
  std::vector<Worst> checks = {
      {"metric_min_eigenvalue", min_h, 0.0, false},
      {"equivariance_residual", equiv, cfg.tol, true},
      {"gram_recursion_residual", gram, std::max(1e-10, tail), true},
      {"moment_level_residual", level, 1e-8, true},
      {"moment_level_gram_minus_identity_min_eigenvalue", level_min, -1e-8, false},
  };
  json report = report_header(cfg);
  report["quiver"] = cfg.quiver_path;
  report["samples"] = cfg.samples;
  bool all = true;
  json list = json::array();
  for (const Worst& c : checks) {
    // strict positivity for the metric eigenvalue
    const bool ok = c.name == "metric_min_eigenvalue" ? c.value > 0 : c.pass();
    all = all && ok;
    list.push_back({{"name", c.name}, {"value", c.value}, {"threshold", c.tol}, {"pass", ok}});
    log(c.name + (ok ? " ok" : " FAILED"));
  }
  report["checks"] = list;
  report["pass"] = all;
  emit(cfg, report);
  return all ? 0 : 3;
}

// --- topology ----------------------------------------------------------------

std::pair<int, int> parse_range(const std::string& text) {
  const auto dots = text.find("..");
  try {
    if (dots == std::string::npos) {
      const int v = std::stoi(text);
      return {v, v};
    }
    return {std::stoi(text.substr(0, dots)), std::stoi(text.substr(dots + 2))};
  } catch (const std::exception&) {
    fail(ErrorCode::InvalidInput, "bad range \"" + text + "\" (expected lo..hi)");
  }
}

std::string sweep_csv(const std::vector<SweepPoint>& pts) {
  std::ostringstream out;
  out << "m,dim,log_chi,chi,closed_form_matches_poincare,palindromic\n";
  out.precision(17);
  for (const SweepPoint& p : pts)
    out << p.m << "," << p.dim << "," << p.log_chi << "," << p.chi.str() << "," << p.chi_matches_poincare << ","
        << p.palindromic << "\n";
  return out.str();
}

int run_topology(const RunConfig& cfg) {
  const auto pattern = parse_pattern(cfg.pattern);
  if (static_cast<int>(pattern.size()) != cfg.hidden + 2)
    fail(ErrorCode::InvalidInput, "--d needs k+2 entries for --k " + std::to_string(cfg.hidden));
  const auto [lo, hi] = parse_range(cfg.sweep);
  if (lo < 1 || hi < lo) fail(ErrorCode::InvalidInput, "sweep range must satisfy 1 <= lo <= hi");
  std::vector<ChainKind> kinds;
  if (cfg.chain == "A" || cfg.chain == "both") kinds.push_back(ChainKind::A);
  if (cfg.chain == "Aprime" || cfg.chain == "A'" || cfg.chain == "both") kinds.push_back(ChainKind::Aprime);
  if (kinds.empty()) fail(ErrorCode::InvalidInput, "--chain must be A, Aprime or both");

  FactorCache cache;
  SweepOptions opts;
  opts.cache = &cache;
  json report = report_header(cfg);
  report["pattern"] = cfg.pattern;
  report["k"] = cfg.hidden;
  report["sweep"] = {lo, hi};
  std::map<ChainKind, std::vector<SweepPoint>> sweeps;
  bool consistent = true;
  for (ChainKind kind : kinds) {
    log(std::string("sweeping ") + chain_name(kind));
    auto pts = chi_sweep(kind, pattern, lo, hi, opts);
    const std::string file = std::string("chi_") + chain_name(kind) + ".csv";
    write_text_file((fs::path(cfg.out_dir) / file).string(), sweep_csv(pts));
    bool closed = true, pal = true;
    for (const SweepPoint& p : pts) {
      closed = closed && p.chi_matches_poincare;
      pal = pal && p.palindromic;
    }
    consistent = consistent && closed && pal;
    report["chains"][chain_name(kind)] = {{"csv", file},
                                         {"points", pts.size()},
                                         {"closed_form_matches_poincare", closed},
                                         {"palindromic", pal}};
    sweeps[kind] = std::move(pts);
  }
  if (sweeps.size() == 2) {
    const auto rows = emit_chi_plot(sweeps[ChainKind::A], sweeps[ChainKind::Aprime]);
    write_text_file((fs::path(cfg.out_dir) / "chi_plot.csv").string(), chi_csv(rows));
    std::size_t matched = 0, below = 0;
    for (const ChiRow& r : rows)
      if (r.log_chi_a && r.log_chi_aprime) {
        ++matched;
        if (*r.log_chi_aprime < *r.log_chi_a) ++below;
      }
    report["plot"] = {{"csv", "chi_plot.csv"}, {"matched_rows", matched}, {"aprime_below_a", below}};
  }
  report["pass"] = consistent;
  emit(cfg, report);
  return consistent ? 0 : 3;
}

// --- train -------------------------------------------------------------------

json point_json(const ChartPoint& p) {
  json w = json::array(), b = json::array();
  for (const Matrix& m : p.W) w.push_back(to_json(m));
  for (const Matrix& m : p.b) b.push_back(to_json(m));
  return {{"W", w}, {"b", b}};
}

int run_train(const RunConfig& cfg) {
  const QuiverFile qf = load_quiver_file(cfg.quiver_path);
  const ActivationKind kind = cfg.activation.empty() ? qf.activation : parse_activation(cfg.activation);
  const IOSpec io = qf.iospec(kind);
  const Samples data = load_dataset_csv(cfg.data_path, io.input_dim(qf.dims), io.output_dim(qf.dims));
  TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  tc.validate();
  log("training on " + std::to_string(data.size()) + " samples for " + std::to_string(tc.steps) + " steps");
  const TrainReport rep = train(qf.quiver, qf.dims, io, data, tc);

  json report = report_header(cfg);
  report["quiver"] = cfg.quiver_path;
  report["data"] = cfg.data_path;
  report["config"] = {{"steps", tc.steps},
                      {"step_size", tc.step_size},
                      {"metric", metric_mode_name(tc.metric)},
                      {"activation", activation_name(kind)},
                      {"batch_size", tc.batch_size},
                      {"grad_tol", tc.grad_tol},
                      {"init_scale", tc.init_scale}};
  report["termination"] = termination_name(rep.termination);
  report["steps_taken"] = rep.steps_taken;
  report["final_step_size"] = rep.final_step_size;
  report["initial_loss"] = rep.loss_trace.front();
  report["final_loss"] = rep.loss_trace.back();
  report["loss_trace"] = rep.loss_trace;
  report["grad_norm_trace"] = rep.grad_norm_trace;
  report["final_point"] = point_json(rep.final_point);
  emit(cfg, report);
  write_timing(cfg, rep.wall_seconds);

  std::ostringstream csv;
  csv.precision(17);
  csv << "step,loss,grad_norm\n";
  for (std::size_t k = 0; k < rep.loss_trace.size(); ++k) {
    csv << k << "," << rep.loss_trace[k] << ",";
    if (k < rep.grad_norm_trace.size()) csv << rep.grad_norm_trace[k];
    csv << "\n";
  }
  write_text_file((fs::path(cfg.out_dir) / "trace.csv").string(), csv.str());
  log("final loss " + std::to_string(rep.loss_trace.back()) + " (" + termination_name(rep.termination) + ")");
  return 0;
}

// --- approx ------------------------------------------------------------------

TargetFn target_function(const RunConfig& cfg) {
  const double lo = cfg.lo, hi = cfg.hi;
  if (cfg.target == "step")
    return [lo, hi](const Vector& x) {
      const double u = (x(0) - lo) / (hi - lo);
      return Vector::Constant(1, u >= 1.0 / 3 && u < 2.0 / 3 ? 1.0 : 0.0);
    };
  if (cfg.target == "sin")
    return [lo, hi](const Vector& x) { return Vector::Constant(1, std::sin(2 * M_PI * (x(0) - lo) / (hi - lo))); };
  // x,y samples, linearly interpolated and held constant outside their range
  const Samples s = load_dataset_csv(cfg.target, 1, 1);
  std::vector<std::pair<double, double>> pts;
  for (std::size_t k = 0; k < s.size(); ++k) pts.emplace_back(s.X(k, 0), s.Y(k, 0));
  std::sort(pts.begin(), pts.end());
  return [pts](const Vector& x) {
    const double v = x(0);
    if (v <= pts.front().first) return Vector::Constant(1, pts.front().second);
    if (v >= pts.back().first) return Vector::Constant(1, pts.back().second);
    auto it = std::lower_bound(pts.begin(), pts.end(), std::make_pair(v, -std::numeric_limits<double>::infinity()));
    const auto& [x1, y1] = *it;
    const auto& [x0, y0] = *(it - 1);
    return Vector::Constant(1, y0 + (y1 - y0) * (v - x0) / (x1 - x0));
  };
}

int run_approx(const RunConfig& cfg) {
  if (!(cfg.hi > cfg.lo)) fail(ErrorCode::InvalidInput, "--lo must be below --hi");
  const WebSpec spec = cfg.web_path.empty() ? uniform_web_1d(cfg.lo, cfg.hi, 3) : load_web_file(cfg.web_path);
  const CenteredWeb web = build_web(spec);
  const TargetFn f = target_function(cfg);
  const Vector lo = Vector::Constant(web.n, cfg.lo), hi = Vector::Constant(web.n, cfg.hi);
  log("web: " + std::to_string(web.chamber_count()) + " chambers, " + std::to_string(web.compact_count()) + " compact");
  const AffineEmbedding L = lift_web(web);
  const auto runs = uat_sweep(f, lo, hi, web, cfg.ts);

  json report = report_header(cfg);
  report["target"] = cfg.target;
  report["box"] = {cfg.lo, cfg.hi};
  report["web"] = {{"n", web.n},
                   {"chambers", web.chamber_count()},
                   {"compact_chambers", web.compact_count()},
                   {"lift_dim", L.A.rows()},
                   {"lift_matrix", to_json(L.A)},
                   {"lift_offset", to_json(L.offset)}};
  json list = json::array();
  for (const UatResult& r : runs)
    list.push_back({{"t", r.t},
                    {"l2_error", r.l2_error},
                    {"relative_error", r.f_norm > 0 ? r.l2_error / r.f_norm : r.l2_error},
                    {"step_error", r.step_error},
                    {"tail_error", r.tail_error},
                    {"wall_error", r.wall_error},
                    {"wall_volume", r.wall_volume},
                    {"interpolation_residual", r.interpolation_residual}});
  report["runs"] = list;
  emit(cfg, report);
  return 0;
}

}  // namespace

void RunConfig::validate() const {
  auto need = [](const std::string& path, const char* flag) {
    if (path.empty()) fail(ErrorCode::InvalidInput, std::string(flag) + " is required");
    if (!fs::is_regular_file(path)) fail(ErrorCode::InvalidInput, std::string(flag) + ": no such file " + path);
  };
  if (subcommand == "verify") need(quiver_path, "--quiver");
  if (subcommand == "train") {
    need(quiver_path, "--quiver");
    need(data_path, "--data");
  }
  if (subcommand == "approx" && !web_path.empty()) need(web_path, "--web");
  if (subcommand == "approx" && target != "step" && target != "sin") need(target, "--target");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  const fs::path probe = fs::path(out_dir) / ".quivernet_write_probe";
  {
    std::ofstream test(probe);
    if (!test) fail(ErrorCode::InvalidInput, "--out: directory not writable: " + out_dir);
  }
  fs::remove(probe, ec);
}

int run(int argc, char** argv) {
  RunConfig cfg;
  CLI::App app{"Neural networks as framed quiver representations"};
  app.require_subcommand(1);
  std::string metric = "euclidean";

  auto common = [&](CLI::App* sub) {
    sub->add_option("--seed", cfg.seed, "random seed");
    sub->add_option("--out", cfg.out_dir, "output directory");
    sub->add_flag("--stdout", cfg.to_stdout, "also print the report JSON on stdout");
    sub->add_flag("-q,--quiet", quiet, "no progress messages on stderr");
  };

  auto* verify = app.add_subcommand("verify", "run the metric property suite on random stable representations");
  verify->add_option("--quiver", cfg.quiver_path, "quiver JSON file")->required();
  verify->add_option("--samples", cfg.samples, "number of random representations")->check(CLI::PositiveNumber);
  verify->add_option("--tol", cfg.tol, "equivariance tolerance");
  common(verify);

  auto* topo = app.add_subcommand("topology", "Euler characteristic sweeps of chain architectures");
  topo->add_option("--chain", cfg.chain, "A, Aprime or both");
  topo->add_option("--k", cfg.hidden, "number of hidden vertices")->check(CLI::NonNegativeNumber);
  topo->add_option("--d", cfg.pattern, "dimension pattern, m is the swept width");
  topo->add_option("--sweep", cfg.sweep, "range of m, lo..hi");
  common(topo);

  auto* tr = app.add_subcommand("train", "train a network on a CSV dataset");
  tr->add_option("--quiver", cfg.quiver_path, "quiver JSON file")->required();
  tr->add_option("--data", cfg.data_path, "CSV dataset (inputs then outputs)")->required();
  tr->add_option("--steps", cfg.train.steps, "step budget");
  tr->add_option("--lr", cfg.train.step_size, "step size");
  tr->add_option("--metric", metric, "euclidean or ricci");
  tr->add_option("--activation", cfg.activation, "sigma, psi or none");
  tr->add_option("--batch", cfg.train.batch_size, "minibatch size, 0 for full batch");
  tr->add_option("--tol", cfg.train.grad_tol, "gradient norm tolerance");
  tr->add_flag("--reduce", cfg.train.symmetry_reduction, "fix the orthogonal gauge at eligible arrows");
  common(tr);

  auto* ap = app.add_subcommand("approx", "constructive approximation by a tropical web");
  ap->add_option("--target", cfg.target, "step, sin, or a CSV of x,y samples");
  ap->add_option("--web", cfg.web_path, "web JSON (default: three equal chambers on the box)");
  ap->add_option("--t", cfg.ts, "sharpness values")->delimiter(',');
  ap->add_option("--lo", cfg.lo, "box lower bound");
  ap->add_option("--hi", cfg.hi, "box upper bound");
  common(ap);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  cfg.subcommand = app.get_subcommands().front()->get_name();

  try {
    cfg.train.metric = parse_metric_mode(metric);
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();
    int code = 0;
    if (cfg.subcommand == "verify") code = run_verify(cfg);
    if (cfg.subcommand == "topology") code = run_topology(cfg);
    if (cfg.subcommand == "train") code = run_train(cfg);
    if (cfg.subcommand == "approx") code = run_approx(cfg);
    if (cfg.subcommand != "train")
      write_timing(cfg, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    return code;
  } catch (const Error& e) {
    std::cerr << "quivernet: " << e.what() << "\n";
    return is_validation_error(e.code()) ? 2 : 3;
  } catch (const std::exception& e) {
    std::cerr << "quivernet: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace quivernet
