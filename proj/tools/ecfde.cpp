// ecfde command-line tool: thresholded-ECF density estimation, kappa
// selection, simulation and Monte-Carlo benchmarks.

#include <ecfde/ecfde.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace ecfde;
using json = nlohmann::json;

enum ExitCode
{
  exit_ok = 0,
  exit_runtime = 1,
  exit_check = 2,
  exit_usage = 64,
  exit_config = 65
};

// Failure that maps to a specific exit code and error category.
struct CliFailure : std::runtime_error
{
  int code;
  std::string category;
  CliFailure(int c, std::string cat, const std::string& msg)
    : std::runtime_error(msg)
    , code(c)
    , category(std::move(cat))
  {}
};

void report_error(const std::string& category, const std::string& message)
{
  std::string m = message;
  std::replace(m.begin(), m.end(), '\n', ' ');
  std::replace(m.begin(), m.end(), '"', '\'');
  std::cerr << "ecfde: error category=" << category << " message=\"" << m << "\"\n";
}

std::string lower(std::string s)
{
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string resolve_model(const std::string& name)
{
  for (const auto& m : model_names())
    if (lower(m) == lower(name))
      return m;
  throw invalid_argument("unknown model '" + name + "'");
}

// Settings shared by the subcommands that build an estimate.
struct Common
{
  std::string input;
  std::string model;
  std::vector<std::string> params;
  std::string gamma_convention = "shape-scale";
  std::string kind = "iid";
  double a = 3.0;
  std::size_t burn_in = 0;
  std::size_t n = 0;
  std::uint64_t seed = 1;
  std::uint64_t stream = 0;

  std::string rule = "sqrtlog";
  std::optional<double> kappa;
  double delta = 0.05;
  double kappa_max = 5.0;
  int window = 1;
  std::string step = "index";
  std::vector<double> extent;
  std::vector<std::size_t> points;
  double oversample = 2.0;
  std::size_t budget = FrequencyGrid::default_budget;
  std::string domain = "full";
};

void add_model_options(CLI::App* sub, Common& c, bool with_input = true)
{
  if (with_input)
    sub->add_option("--input", c.input, "CSV file of observations, one row per observation");
  sub->add_option("--model", c.model, "Model name (N, MixNN, GB, Gamma32, Mix1D, Example1, Gauss1D)");
  sub->add_option("--param", c.params, "Model parameter as key=value")->take_all();
  sub->add_option("--gamma-convention", c.gamma_convention, "Gamma parameters: shape-scale or shape-rate")
    ->check(CLI::IsMember({ "shape-scale", "shape-rate" }))
    ->capture_default_str();
  sub->add_option("--kind", c.kind, "Sampler: iid, doukhan or dyadic")
    ->check(CLI::IsMember({ "iid", "doukhan", "dyadic" }))
    ->capture_default_str();
  sub->add_option("--a", c.a, "Doukhan chain exponent (a > 1)")->capture_default_str();
  sub->add_option("--burn-in", c.burn_in, "Dyadic chain burn-in")->capture_default_str();
  sub->add_option("--n", c.n, "Number of observations to simulate");
  sub->add_option("--seed", c.seed, "Base seed")->capture_default_str();
  sub->add_option("--stream", c.stream, "Stream id")->capture_default_str();
}

void add_estimator_options(CLI::App* sub, Common& c)
{
  sub->add_option("--rule", c.rule, "Threshold rule: sqrtlog, log or udependent")
    ->check(CLI::IsMember({ "sqrtlog", "log", "udependent" }))
    ->capture_default_str();
  sub->add_option("--kappa", c.kappa, "Fixed kappa; adaptive selection when omitted");
  sub->add_option("--delta", c.delta, "Kappa scan step")->capture_default_str();
  sub->add_option("--kappa-max", c.kappa_max, "Kappa scan bound")->capture_default_str();
  sub->add_option("--window", c.window, "Consecutive equal Euler characteristics required")
    ->capture_default_str();
  sub->add_option("--stabilization-step", c.step, "Compare chi at consecutive indices or at kappa - 1")
    ->check(CLI::IsMember({ "index", "unit" }))
    ->capture_default_str();
  sub->add_option("--extent", c.extent, "Frequency extent per axis (automatic when omitted)");
  sub->add_option("--points", c.points, "Odd node count per axis");
  sub->add_option("--oversample", c.oversample, "Spacing is 2 pi / (oversample * sample range)")
    ->capture_default_str();
  sub->add_option("--budget", c.budget, "Maximum number of frequency nodes")->capture_default_str();
  sub->add_option("--domain", c.domain, "Integration domain: full or hyperbolic")
    ->check(CLI::IsMember({ "full", "hyperbolic" }))
    ->capture_default_str();
}

ModelParams parse_params(const std::vector<std::string>& items)
{
  ModelParams p;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos)
      throw invalid_argument("--param expects key=value, got '" + item + "'");
    try {
      p[item.substr(0, eq)] = std::stod(item.substr(eq + 1));
    } catch (const std::logic_error&) {
      throw invalid_argument("--param value is not a number: '" + item + "'");
    }
  }
  return p;
}

std::optional<TargetModel> model_of(const Common& c)
{
  if (c.model.empty())
    return std::nullopt;
  return make_model(resolve_model(c.model), parse_params(c.params),
                    parse_gamma_convention(c.gamma_convention));
}

SampleSet read_samples_csv(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw CliFailure(exit_runtime, "io", "cannot open input '" + path + "'");
  std::vector<double> data;
  std::size_t d = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#')
      continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream is(line);
    std::vector<double> row;
    std::string tok;
    bool numeric = true;
    while (is >> tok) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(tok, &used));
        numeric = numeric && used == tok.size();
      } catch (const std::logic_error&) {
        numeric = false;
      }
    }
    if (row.empty() && !numeric && data.empty() && d == 0)
      continue; // header
    if (!numeric) {
      if (data.empty() && d == 0)
        continue; // header
      throw CliFailure(exit_runtime, "io", path + ":" + std::to_string(lineno) + ": not numeric");
    }
    if (row.empty())
      continue;
    if (d == 0)
      d = row.size();
    if (row.size() != d)
      throw CliFailure(exit_runtime, "io", path + ":" + std::to_string(lineno) + ": column count");
    data.insert(data.end(), row.begin(), row.end());
  }
  if (d == 0)
    throw CliFailure(exit_runtime, "io", "input '" + path + "' holds no observations");
  return SampleSet(d, std::move(data));
}

SampleSet obtain_samples(const Common& c, const std::optional<TargetModel>& model)
{
  if (!c.input.empty())
    return read_samples_csv(c.input);
  if (!model)
    throw invalid_argument("either --input or --model is required");
  if (c.n == 0)
    throw invalid_argument("--n is required when sampling from a model");
  ChainConfig cfg;
  cfg.kind = parse_chain_kind(c.kind);
  cfg.a = c.a;
  cfg.burn_in = c.burn_in;
  RngStream rng(c.seed, c.stream);
  return simulate(cfg, *model, c.n, rng);
}

EstimatorOptions estimator_options(const Common& c)
{
  EstimatorOptions o;
  o.rule = parse_threshold_kind(c.rule);
  o.kappa = c.kappa;
  o.delta = c.delta;
  o.kappa_max = c.kappa_max;
  o.window = c.window;
  o.step = parse_stabilization_step(c.step);
  o.extent = c.extent;
  o.points = c.points;
  o.oversample = c.oversample;
  o.budget = c.budget;
  return o;
}

std::ofstream open_output(const std::string& path)
{
  std::ofstream out(path);
  if (!out)
    throw CliFailure(exit_runtime, "io", "cannot write '" + path + "'");
  return out;
}

// Writes text to `path`, or to stdout when the path is empty.
void emit(const std::string& path, const std::string& text)
{
  if (path.empty()) {
    std::cout << text;
    return;
  }
  auto out = open_output(path);
  out << text;
}

// Options left unset are omitted so that re-feeding the manifest leaves
// them unset; `resolved` holds comment lines for automatically chosen values.
void write_manifest(const std::string& path, const CLI::App& sub, int threads,
                    const std::vector<std::string>& resolved = {})
{
  if (path.empty())
    return;
  auto out = open_output(path);
  out << "# ecfde " << version << " run manifest; re-run with: ecfde --config " << path << "\n";
  for (const auto& r : resolved)
    out << "# resolved " << r << '\n';
  out << "threads=" << threads << '\n' << '[' << sub.get_name() << "]\n";
  std::istringstream body(sub.config_to_str(true, false));
  std::string line;
  while (std::getline(body, line))
    if (!line.empty() && !line.ends_with("=\"\""))
      out << line << '\n';
}

std::string manifest_path(const std::string& explicit_path, const std::string& out)
{
  if (!explicit_path.empty())
    return explicit_path;
  return out.empty() ? std::string{} : out + ".manifest.ini";
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{ "Thresholded empirical characteristic function density estimation" };
  app.set_version_flag("--version", std::string(ecfde::version));
  app.set_config("--config", "", "Read options from an INI file (as written in run manifests)");
  app.require_subcommand(1);

  int threads = default_thread_count();
  std::string manifest;
  app.add_option("--threads", threads, "Worker threads (default: ECFDE_THREADS or all cores)");
  app.add_option("--manifest", manifest, "Run-manifest path (default: <out>.manifest.ini)")
    ->configurable(false);

  Common c;
  std::string out, plan_path, out_dir = ".";
  bool check = false, no_clip = false, asymptotic = false;
  std::vector<std::size_t> x_points;
  std::vector<double> x_lo, x_hi, s_values, a_matrix;
  double dn_n = 0.0;
  int dn_d = 2;
  double rate_n = 0.0;
  std::size_t replications_override = 0;

  auto* estimate_cmd = app.add_subcommand("estimate", "Density estimate on a spatial lattice (CSV x_1..x_d,fhat)");
  add_model_options(estimate_cmd, c);
  add_estimator_options(estimate_cmd, c);
  estimate_cmd->add_option("--out", out, "Output CSV")->required();
  estimate_cmd->add_option("--x-points", x_points, "Spatial nodes per axis (512 in 1-D, 201 in 2-D)");
  estimate_cmd->add_option("--x-lo", x_lo, "Lower corner of the spatial box");
  estimate_cmd->add_option("--x-hi", x_hi, "Upper corner of the spatial box");
  estimate_cmd->add_flag("--no-clip", no_clip, "Keep negative values of the real part");

  auto* select_cmd = app.add_subcommand("select-kappa", "Adaptive kappa by Euler characteristic stabilization (JSON)");
  add_model_options(select_cmd, c);
  add_estimator_options(select_cmd, c);
  select_cmd->add_option("--out", out, "Output JSON (stdout when omitted)");

  auto* curve_cmd = app.add_subcommand("euler-curve", "Euler characteristic of the excursion set against kappa (CSV kappa,chi)");
  add_model_options(curve_cmd, c);
  add_estimator_options(curve_cmd, c);
  curve_cmd->add_option("--out", out, "Output CSV")->required();

  auto* simulate_cmd = app.add_subcommand("simulate", "Sample path to CSV");
  add_model_options(simulate_cmd, c, false);
  simulate_cmd->add_option("--target", c.model, "Alias of --model");
  simulate_cmd->add_option("--out", out, "Output CSV")->required();

  auto* bench_cmd = app.add_subcommand("bench", "Monte-Carlo risk benchmark from a plan file");
  bench_cmd->add_option("--plan", plan_path, "Plan INI file")->required();
  bench_cmd->add_option("--out-dir", out_dir, "Directory for report.csv and replications.csv")
    ->capture_default_str();
  bench_cmd->add_option("--replications", replications_override, "Override the plan's replication count");
  bench_cmd->add_flag("--check", check, "Exit with code 2 when a cell misses its reference value");

  auto* risk_cmd = app.add_subcommand("risk", "L2 risk of the estimate against the model (JSON)");
  add_model_options(risk_cmd, c);
  add_estimator_options(risk_cmd, c);
  risk_cmd->add_option("--out", out, "Output JSON (stdout when omitted)");

  auto* dn_cmd = app.add_subcommand("dn-volume", "Volume of the hyperbolic frequency domain");
  dn_cmd->add_option("--n", dn_n, "n > 1")->required();
  dn_cmd->add_option("--d", dn_d, "Dimension, 2 or 3")->capture_default_str();
  dn_cmd->add_flag("--asymptotic", asymptotic, "Leading-order value instead of the exact one");

  auto* rate_cmd = app.add_subcommand("rate", "Anisotropic Sobolev rate and balancing cutoffs (JSON)");
  rate_cmd->add_option("--s", s_values, "Smoothness exponent per axis")->required();
  rate_cmd->add_option("--n", rate_n, "Sample size")->required();
  rate_cmd->add_option("--A", a_matrix, "Direction matrix, row-major (checked for class membership)");

  auto* ecf_cmd = app.add_subcommand("dump-ecf", "ECF on the frequency grid (CSV u_1..u_d,re,im)");
  add_model_options(ecf_cmd, c);
  add_estimator_options(ecf_cmd, c);
  ecf_cmd->add_option("--out", out, "Output CSV")->required();

  auto* mask_cmd = app.add_subcommand("dump-mask", "Retained frequencies as a plain PBM image");
  add_model_options(mask_cmd, c);
  add_estimator_options(mask_cmd, c);
  mask_cmd->add_option("--out", out, "Output PBM")->required();

  for (auto* sub : app.get_subcommands({}))
    sub->configurable();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ConfigError& e) {
    report_error("config", e.what());
    return exit_config;
  } catch (const CLI::FileError& e) {
    report_error("config", e.what());
    return exit_config;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ValidationError& e) {
    report_error("config", e.what());
    return exit_config;
  } catch (const CLI::ParseError& e) {
    report_error("usage", e.what());
    return exit_usage;
  }

  const CLI::App* sub = app.get_subcommands().front();
  try {
    set_thread_count(threads);
    const std::string manifest_file = manifest_path(manifest, out);

    if (sub == dn_cmd) {
      std::cout << std::setprecision(12) << dn_volume(dn_n, dn_d, asymptotic) << '\n';
      write_manifest(manifest, *sub, threads);
      return exit_ok;
    }

    if (sub == rate_cmd) {
      SobolevSpec spec{ s_values, 1.0, std::nullopt };
      if (!a_matrix.empty()) {
        const auto d = static_cast<Eigen::Index>(s_values.size());
        if (static_cast<Eigen::Index>(a_matrix.size()) != d * d)
          throw invalid_argument("--A needs d*d entries");
        SmallMatrix A(d, d);
        for (Eigen::Index i = 0; i < d; ++i)
          for (Eigen::Index j = 0; j < d; ++j)
            A(i, j) = a_matrix[static_cast<std::size_t>(i * d + j)];
        spec.A = A;
      }
      const SobolevRate r = sobolev_rate(spec, rate_n);
      json j{ { "s_bar", r.s_bar },
              { "m_star", r.m_star },
              { "rate_exponent", r.rate_exponent },
              { "rate_value", r.rate_value } };
      std::cout << j.dump() << '\n';
      write_manifest(manifest, *sub, threads);
      return exit_ok;
    }

    if (sub == simulate_cmd) {
      const auto model = model_of(c);
      if (!model)
        throw invalid_argument("--model (or --target) is required");
      const SampleSet x = obtain_samples(c, model);
      auto os = open_output(out);
      os << std::setprecision(17);
      for (std::size_t k = 0; k < x.dim(); ++k)
        os << (k ? "," : "") << "x_" << (k + 1);
      os << '\n';
      for (std::size_t j = 0; j < x.size(); ++j) {
        for (std::size_t k = 0; k < x.dim(); ++k)
          os << (k ? "," : "") << x(j, k);
        os << '\n';
      }
      write_manifest(manifest_file, *sub, threads);
      return exit_ok;
    }

    if (sub == bench_cmd) {
      std::ifstream pin(plan_path);
      if (!pin)
        throw CliFailure(exit_config, "config", "cannot open plan '" + plan_path + "'");
      ExperimentPlan plan;
      try {
        plan = read_plan(pin);
        if (replications_override)
          plan.replications = replications_override;
        plan.model = resolve_model(plan.model);
        (void)plan_model(plan);
      } catch (const std::exception& e) {
        throw CliFailure(exit_config, "config", e.what());
      }
      std::filesystem::create_directories(out_dir);
      const RiskReport report = run_experiment(plan, [](const RiskRow& row) {
        std::cerr << row.model << " n=" << row.n << " risk_x100=" << 100.0 * row.risk_mean
                  << " kappa=" << row.kappa_mean << " failures=" << row.failures << " ("
                  << std::fixed << std::setprecision(1) << row.wall_seconds << " s)\n"
                  << std::defaultfloat << std::setprecision(6);
      });
      {
        auto os = open_output((std::filesystem::path(out_dir) / "report.csv").string());
        write_report_csv(os, report);
        auto rs = open_output((std::filesystem::path(out_dir) / "replications.csv").string());
        write_replications_csv(rs, report);
        auto ps = open_output((std::filesystem::path(out_dir) / "plan.resolved.ini").string());
        write_plan(ps, plan);
      }
      write_manifest(manifest.empty() ? (std::filesystem::path(out_dir) / "manifest.ini").string()
                                      : manifest,
                     *sub, threads);
      if (check) {
        bool ok = true;
        for (const auto& row : report.rows) {
          const CheckOutcome o = check_row(row);
          if (!o.ok()) {
            ok = false;
            std::cerr << "check: " << row.model << " n=" << row.n
                      << (o.failures_ok ? "" : " too many failed replications")
                      << (o.risk_ok ? "" : " risk outside tolerance") << '\n';
          }
        }
        if (!ok) {
          report_error("check", "acceptance tolerance breached");
          return exit_check;
        }
      }
      return exit_ok;
    }

    // Remaining subcommands estimate from a sample.
    const auto model = model_of(c);
    const SampleSet x = obtain_samples(c, model);
    if (model && model->dim() != x.dim())
      throw invalid_argument("model dimension differs from the sample dimension");
    const EstimatorOptions opt = estimator_options(c);
    const EcfEstimate est = estimate(x, opt);
    const IntegrationDomain domain{ parse_domain_kind(c.domain), static_cast<double>(x.size()) };

    if (sub == estimate_cmd) {
      const std::size_t d = x.dim();
      const Box box = (x_lo.size() == d && x_hi.size() == d) ? Box{ x_lo, x_hi }
                      : model                                 ? model->plot_box()
                                                              : sample_box(x);
      SpatialGrid grid = default_spatial_grid(box);
      if (!x_points.empty()) {
        if (x_points.size() != d)
          throw invalid_argument("--x-points needs one value per axis");
        grid.points = x_points;
      }
      const DensityEstimate dens = invert_to_density(est.tilde, domain, grid, !no_clip);
      auto os = open_output(out);
      write_density_csv(os, dens);
    } else if (sub == select_cmd || sub == risk_cmd) {
      json j;
      if (sub == select_cmd) {
        j["kappa"] = est.rule.kappa;
        j["stabilized"] = !est.selection || est.selection->stabilized;
        j["delta"] = c.delta;
        j["window"] = c.window;
      } else {
        if (!model)
          throw invalid_argument("risk needs --model");
        const RiskResult r = l2_risk_fourier(est.tilde, *model, domain);
        j["risk"] = r.risk;
        j["norm_f_sq"] = r.norm_f_sq;
        j["normalized_risk"] = r.normalized_risk;
        j["tail_correction"] = r.tail_correction;
        j["kappa_used"] = est.rule.kappa;
        j["coarse_grid"] = r.coarse_grid;
      }
      j["grid_points"] = est.grid().points();
      j["grid_extent"] = est.grid().extent();
      j["boundary_clear"] = est.clearance.clear;
      emit(out, j.dump() + "\n");
    } else if (sub == curve_cmd) {
      const auto chi = euler_curve(est.ecf, x.size(), opt.rule == ThresholdKind::Log ? ThresholdKind::Log
                                                                                    : ThresholdKind::SqrtLog,
                                   opt.delta, opt.kappa_max);
      auto os = open_output(out);
      os << "kappa,chi\n" << std::setprecision(10);
      for (std::size_t k = 0; k < chi.size(); ++k)
        os << static_cast<double>(k) * opt.delta << ',' << chi[k] << '\n';
    } else if (sub == ecf_cmd) {
      auto os = open_output(out);
      write_field_csv(os, est.ecf);
    } else if (sub == mask_cmd) {
      auto os = open_output(out);
      write_mask_pbm(os, est.mask);
    }
    if (!est.clearance.clear)
      std::cerr << "ecfde: warning: retained frequencies touch the grid boundary\n";
    std::ostringstream resolved;
    resolved << "kappa=" << est.rule.kappa << " grid_points=";
    for (std::size_t k = 0; k < est.grid().dim(); ++k)
      resolved << (k ? "x" : "") << est.grid().points()[k];
    resolved << " grid_extent=";
    for (std::size_t k = 0; k < est.grid().dim(); ++k)
      resolved << (k ? "x" : "") << est.grid().extent()[k];
    write_manifest(manifest_file, *sub, threads, { resolved.str() });
    return exit_ok;
  } catch (const CliFailure& e) {
    report_error(e.category, e.what());
    return e.code;
  } catch (const ecfde::invalid_argument& e) {
    report_error("config", e.what());
    return exit_config;
  } catch (const std::exception& e) {
    report_error("runtime", e.what());
    return exit_runtime;
  }
}
