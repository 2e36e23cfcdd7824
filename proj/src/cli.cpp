#include "svp/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <stdexcept>

#include "CLI11.hpp"
#include "json.hpp"
#include "svp/activations.hpp"
#include "svp/cpanet.hpp"
#include "svp/ensembles.hpp"
#include "svp/errors.hpp"
#include "svp/linalg.hpp"
#include "svp/matrix_io.hpp"
#include "svp/perturb.hpp"
#include "svp/stats.hpp"

#ifndef SVP_VERSION
#define SVP_VERSION "unknown"
#endif

namespace svp::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

Vector parse_grid(const std::string& spec) {
  auto to_double = [&](const std::string& s) {
    double v = 0.0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v))
      throw std::invalid_argument("bad grid value \"" + s + "\" in \"" + spec + "\"");
    return v;
  };
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (std::size_t pos; (pos = spec.find(':', start)) != std::string::npos; start = pos + 1)
    parts.push_back(spec.substr(start, pos - start));
  parts.push_back(spec.substr(start));
  if (parts.size() == 1) return {to_double(parts[0])};
  if (parts.size() != 3) throw std::invalid_argument("grid must be start:stop:count, got \"" + spec + "\"");
  std::size_t count = 0;
  const auto& c = parts[2];
  const auto [p, ec] = std::from_chars(c.data(), c.data() + c.size(), count);
  if (ec != std::errc() || p != c.data() + c.size() || count == 0)
    throw std::invalid_argument("grid count must be a positive integer, got \"" + c + "\"");
  return uniform_grid(to_double(parts[0]), to_double(parts[1]), count);
}

namespace {

// Numbers that JSON cannot hold (inf, NaN) become null.
json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json summarize(const std::vector<double>& raw) {
  std::vector<double> x;
  std::copy_if(raw.begin(), raw.end(), std::back_inserter(x), [](double v) { return std::isfinite(v); });
  json j;
  j["count"] = x.size();
  if (x.empty()) return j;
  const auto [mn, mx] = std::minmax_element(x.begin(), x.end());
  j["mean"] = num(mean(x));
  j["std"] = num(stddev(x));
  j["min"] = num(*mn);
  j["p50"] = num(quantile(x, 0.5));
  j["p90"] = num(quantile(x, 0.9));
  j["p99"] = num(quantile(x, 0.99));
  j["max"] = num(*mx);
  return j;
}

json histogram_json(const std::vector<double>& x) {
  const Histogram h = freedman_diaconis(x);
  return {{"lo", num(h.lo)}, {"width", num(h.width)}, {"counts", h.counts}};
}

class OutputDir {
 public:
  explicit OutputDir(fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw FormatError("cannot create output directory " + dir_.string() + ": " + ec.message());
  }

  std::ofstream open(const std::string& name) {
    std::ofstream out(dir_ / name, std::ios::binary);
    if (!out) throw FormatError("cannot write " + (dir_ / name).string());
    files_.push_back(name);
    return out;
  }

  void write_json(const std::string& name, const json& j) {
    auto out = open(name);
    out << j.dump(2) << '\n';
    if (!out) throw FormatError("write failed for " + (dir_ / name).string());
  }

  void note(const std::string& name) { files_.push_back(name); }
  const fs::path& path() const { return dir_; }
  const std::vector<std::string>& files() const { return files_; }

 private:
  fs::path dir_;
  std::vector<std::string> files_;
};

json option_values(const CLI::App& sub) {
  json cfg = json::object();
  for (const CLI::Option* opt : sub.get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "config") continue;
    if (opt->get_type_size() == 0) {
      cfg[name] = opt->count() > 0;
      continue;
    }
    const auto& res = opt->results();
    cfg[name] = res.empty() ? opt->get_default_str() : res.back();
  }
  return cfg;
}

void write_manifest(OutputDir& dir, const CLI::App& sub, std::uint64_t seed) {
  json m;
  m["tool"] = "svperturb";
  m["version"] = SVP_VERSION;
  m["subcommand"] = sub.get_name();
  m["seed"] = seed;
  m["config"] = option_values(sub);
  m["outputs"] = dir.files();
  dir.write_json("manifest.json", m);
}

// Flattens a config object (or a manifest's "config" member) into flag
// tokens. These go before the user's own flags so the latter win.
std::vector<std::string> config_tokens(const json& doc) {
  const json& cfg = doc.contains("config") && doc["config"].is_object() ? doc["config"] : doc;
  std::vector<std::string> tokens;
  for (const auto& [key, value] : cfg.items()) {
    if (key == "subcommand") continue;
    const std::string flag = "--" + key;
    if (value.is_boolean()) {
      if (value.get<bool>()) tokens.push_back(flag);
    } else if (value.is_string()) {
      tokens.push_back(flag);
      tokens.push_back(value.get<std::string>());
    } else if (value.is_number()) {
      tokens.push_back(flag);
      tokens.push_back(value.is_number_float() ? format_double(value.get<double>()) : value.dump());
    } else if (value.is_array()) {
      for (const auto& v : value) {
        tokens.push_back(flag);
        tokens.push_back(v.is_string() ? v.get<std::string>() : v.dump());
      }
    } else if (!value.is_null()) {
      throw std::invalid_argument("config key \"" + key + "\" has an unsupported value");
    }
  }
  return tokens;
}

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError("config " + path + " is not valid JSON: " + e.what());
  }
}

struct Common {
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::string out = "svperturb_out";
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--seed", c.seed, "Master seed for all randomness");
  sub->add_option("--threads", c.threads, "Worker threads (output does not depend on it)")
      ->check(CLI::PositiveNumber);
  sub->add_option("--out", c.out, "Output directory");
  sub->add_option("--config", "JSON config file or manifest; explicit flags take precedence");
}

struct RandomBase {
  std::string input;
  std::size_t n = 8;
  double r = 2.0;
  std::string dist = "gaussian";
};

void add_base(CLI::App* sub, RandomBase& b) {
  sub->add_option("--input", b.input, "Matrix text file for M0 (random M0 when absent)");
  sub->add_option("--n", b.n, "Dimension of a random M0")->check(CLI::PositiveNumber);
  sub->add_option("--r", b.r, "Scale parameter: entries scaled by 1/(r sqrt(8n))");
  sub->add_option("--dist", b.dist, "gaussian|uniform")->check(CLI::IsMember({"gaussian", "uniform"}));
}

Matrix base_matrix(const RandomBase& b, std::uint64_t seed) {
  if (!b.input.empty()) return read_matrix_file(b.input);
  EnsembleSpec spec{b.n, parse_dist(b.dist), b.r, 1, seed};
  return sample_scaled(spec, 0);
}

json family_json(const IdShiftFamily& fam) {
  return {{"n", fam.n},
          {"tau_under", num(fam.tau_under)},
          {"tau_over", num(fam.tau_over)},
          {"s1_0", num(fam.s1_0)},
          {"sn_0", num(fam.sn_0)}};
}


}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Singular-value perturbation experiments for identity-shifted and masked matrices",
               "svperturb"};
  app.option_defaults()->always_capture_default()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(SVP_VERSION));

  Common common;
  RandomBase base;
  std::string rho_grid = "0:1:101";
  std::string format;

  auto* svd_cmd = app.add_subcommand("svd", "Full SVD of a matrix file");
  add_common(svd_cmd, common);
  svd_cmd->add_option("--input", base.input, "Matrix text file")->required();

  auto* sweep_cmd = app.add_subcommand("sweep-rho", "Singular values and derivatives of M0 + rho Id");
  add_common(sweep_cmd, common);
  add_base(sweep_cmd, base);
  sweep_cmd->add_option("--rho-grid", rho_grid, "start:stop:count, inclusive");

  auto* bounds_cmd = app.add_subcommand("bounds-id", "Condition-number bounds for M0 + Id");
  add_common(bounds_cmd, common);
  add_base(bounds_cmd, base);
  bounds_cmd->add_option("--format", format, "json|csv")->check(CLI::IsMember({"json", "csv"}));

  double c_abs = 0.0, c_times_n = 0.0, eta = 0.0;
  std::size_t n = 10, m = 0, trials = 0, depth = 1;
  auto* hard_cmd = app.add_subcommand("hard-bounds", "Deterministic bounds for bounded weights");
  add_common(hard_cmd, common);
  hard_cmd->add_option("--eta", eta, "Mask slope: -1, or in [0,1)");
  auto* c_opt = hard_cmd->add_option("--c", c_abs, "Entry bound c");
  auto* cn_opt = hard_cmd->add_option("--c-times-n", c_times_n, "Entry bound given as c*n");
  c_opt->excludes(cn_opt);
  hard_cmd->add_option("--n", n, "Dimension")->check(CLI::PositiveNumber);
  hard_cmd->add_option("--m", m, "Number of masked positions");
  hard_cmd->add_option("--trials", trials, "Monte-Carlo verification trials (0 = none)");
  hard_cmd->add_option("--depth", depth, "Weight layers in the product")->check(CLI::PositiveNumber);
  hard_cmd->add_option("--format", format, "csv|json")->check(CLI::IsMember({"json", "csv"}));

  std::size_t ens_trials = 1000;
  auto add_ensemble = [&](CLI::App* sub) {
    add_common(sub, common);
    sub->add_option("--n", base.n, "Dimension")->check(CLI::PositiveNumber);
    sub->add_option("--r", base.r, "Scale parameter r");
    sub->add_option("--dist", base.dist, "gaussian|uniform")->check(CLI::IsMember({"gaussian", "uniform"}));
    sub->add_option("--trials", ens_trials, "Trials");
  };
  auto* tw_cmd = app.add_subcommand("tracy-widom", "Edge statistics Z_n, Z~_n, Y_n");
  add_ensemble(tw_cmd);
  auto* abs_cmd = app.add_subcommand("ensemble-abs", "High-probability bounds, absolute value");
  add_ensemble(abs_cmd);
  abs_cmd->add_option("--m", m, "Sign-mask size for D1 and D");

  std::size_t m_tilde = 1;
  double theta = 4.5, r_prime = 2.0;
  auto* relu_cmd = app.add_subcommand("ensemble-relu", "High-probability bounds, ReLU");
  add_ensemble(relu_cmd);
  relu_cmd->add_option("--m", m, "ReLU mask size of D");
  relu_cmd->add_option("--m-tilde", m_tilde, "ReLU mask size of D1");
  relu_cmd->add_option("--theta", theta, "Concentration parameter, 4 < theta <= 2 sqrt(n)");
  relu_cmd->add_option("--r-prime", r_prime, "Auxiliary scale r' > 1");

  auto* edel_cmd = app.add_subcommand("edelman", "kappa/n against the limiting density");
  add_common(edel_cmd, common);
  edel_cmd->add_option("--n", base.n, "Dimension")->check(CLI::PositiveNumber);
  edel_cmd->add_option("--trials", ens_trials, "Trials");

  auto* res_cmd = app.add_subcommand("residual", "How often adding Id lowers kappa");
  add_ensemble(res_cmd);
  res_cmd->add_option("--m", m, "Sign-mask size for D1 and D");

  std::size_t runs = 8;
  std::string fig9_grid = "0:1:21";
  auto* fig9_cmd = app.add_subcommand("fig9", "Toy four-layer network: spectrum of Q against rho");
  add_common(fig9_cmd, common);
  fig9_cmd->add_option("--runs", runs, "Independent realizations");
  fig9_cmd->add_option("--rho-grid", fig9_grid, "start:stop:count, inclusive");

  try {
    // Splice JSON config values in ahead of the explicit flags.
    std::vector<std::string> args = raw_args;
    std::string config_path;
    for (std::size_t i = 0; i < args.size(); ++i) {
      if (args[i] == "--config" && i + 1 < args.size()) {
        config_path = args[i + 1];
        args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i + 2));
        break;
      }
      if (args[i].rfind("--config=", 0) == 0) {
        config_path = args[i].substr(9);
        args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
        break;
      }
    }
    if (!config_path.empty()) {
      const json doc = load_json(config_path);
      if (args.empty() || args.front().rfind("-", 0) == 0) {
        if (!doc.contains("subcommand")) throw CLI::RequiredError("a subcommand (not named in the config)");
        args.insert(args.begin(), doc["subcommand"].get<std::string>());
      }
      const auto tokens = config_tokens(doc);
      args.insert(args.begin() + 1, tokens.begin(), tokens.end());
    }
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return kOk;
    }
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const FormatError& e) {
    err << "I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    OutputDir dir(common.out);

    if (sub == svd_cmd) {
      const Matrix a = read_matrix_file(base.input);
      const SvdResult f = svd(a);
      auto so = dir.open("singular_values.txt");
      write_matrix(so, Matrix(f.s.size(), 1, f.s));
      auto uo = dir.open("U.txt");
      write_matrix(uo, f.U);
      auto vo = dir.open("V.txt");
      write_matrix(vo, f.V);
      out << "svd: " << a.rows() << "x" << a.cols() << ", s1 = " << format_double(f.s.empty() ? 0.0 : f.s.front()) << '\n';

    } else if (sub == sweep_cmd) {
      const Vector grid = parse_grid(rho_grid);
      const IdShiftFamily fam = make_family(base_matrix(base, common.seed));
      const SvTrajectory t = sv_trajectory(fam, grid, true, common.threads);
      auto csv = dir.open("trajectory.csv");
      write_trajectory_csv(csv, t);
      const auto flagged = multiplicity_gaps(fam, grid);
      json s;
      s["family"] = family_json(fam);
      s["grid_points"] = grid.size();
      s["outside_unit_interval"] = t.outside_unit_interval;
      json rhos = json::array();
      for (std::size_t k : flagged) rhos.push_back(grid[k]);
      s["flagged_rho"] = rhos;
      s["growth_envelope_applicable"] = flagged.empty();
      dir.write_json("summary.json", s);
      out << "sweep-rho: " << grid.size() << " grid points, " << flagged.size() << " flagged\n";

    } else if (sub == bounds_cmd) {
      const IdShiftFamily fam = make_family(base_matrix(base, common.seed));
      const KappaBounds kb = kappa_bounds_id(fam);
      const double kappa = condition_number(shift_identity(fam.M0, 1.0));
      if (format == "csv") {
        auto csv = dir.open("bounds.csv");
        csv << "quantity,value\n";
        auto row = [&](const char* k, double v) {
          csv << k << ',' << (std::isfinite(v) ? format_double(v) : std::string("NA")) << '\n';
        };
        row("kappa_measured", kappa);
        row("via_opnorm_tight", kb.via_opnorm_tight);
        row("via_opnorm_simple", kb.via_opnorm_simple);
        row("via_tau_tight", kb.via_tau_tight);
        row("via_tau_simple", kb.via_tau_simple);
        row("tau_under", fam.tau_under);
        row("tau_over", fam.tau_over);
        row("s1_0", fam.s1_0);
        row("sn_0", fam.sn_0);
      } else {
        dir.write_json("bounds.json", {{"family", family_json(fam)},
                                       {"kappa_measured", num(kappa)},
                                       {"via_opnorm_tight", num(kb.via_opnorm_tight)},
                                       {"via_opnorm_simple", num(kb.via_opnorm_simple)},
                                       {"via_tau_tight", num(kb.via_tau_tight)},
                                       {"via_tau_simple", num(kb.via_tau_simple)},
                                       {"applicable_opnorm", kb.applicable_opnorm},
                                       {"applicable_tau", kb.applicable_tau}});
      }
      out << "bounds-id: kappa(M0+Id) = " << format_double(kappa) << ", tau bound "
          << (kb.applicable_tau ? format_double(kb.via_tau_tight) : std::string("n/a")) << '\n';

    } else if (sub == hard_cmd) {
      if (!valid_eta(eta)) throw HypothesisError("eta must be -1 or lie in [0,1), got " + format_double(eta));
      if (c_opt->count() == 0 && cn_opt->count() == 0) throw CLI::RequiredError("--c or --c-times-n");
      const double c = c_opt->count() ? c_abs : c_times_n / static_cast<double>(n);
      if (m > n) throw std::invalid_argument("--m exceeds --n");
      HardBoundSweep sweep;
      if (trials > 0) {
        sweep = hard_bound_monte_carlo(c, n, m, eta, trials, common.seed, depth, common.threads);
      } else {
        sweep.reports = hard_bounds(c, n, m, eta);
      }
      if (format == "json") {
        json rows = json::array();
        for (std::size_t k = 0; k < sweep.reports.size(); ++k) {
          const auto& r = sweep.reports[k];
          rows.push_back({{"theorem", r.theorem},
                          {"hypothesis", r.hypothesis},
                          {"hypothesis_ok", r.applicable},
                          {"bound", num(r.bound_value)},
                          {"measured_kappa_max", trials ? num(sweep.measured_kappa_max[k]) : json(nullptr)},
                          {"violations", trials ? json(sweep.violations[k]) : json(nullptr)}});
        }
        dir.write_json("hard_bounds.json", {{"eta", eta}, {"c", c}, {"n", n}, {"m", m}, {"trials", trials}, {"reports", rows}});
      } else {
        auto csv = dir.open("hard_bounds.csv");
        write_hard_bound_csv(csv, sweep);
      }
      for (std::size_t k = 0; k < sweep.reports.size(); ++k) {
        const auto& r = sweep.reports[k];
        out << "hard-bounds: " << r.theorem << " "
            << (r.applicable ? format_double(r.bound_value) : std::string("not applicable"));
        if (trials) out << ", violations " << sweep.violations[k] << "/" << trials;
        out << '\n';
      }

    } else if (sub == tw_cmd) {
      const EnsembleSpec spec{base.n, parse_dist(base.dist), base.r, ens_trials, common.seed};
      const EdgeStats es = edge_stats(spec, common.threads);
      auto csv = dir.open("edge_samples.csv");
      csv << "trial,z,z_tilde,y,tau_ratio\n";
      for (std::size_t t = 0; t < ens_trials; ++t) {
        csv << t << ',' << format_double(es.z_samples[t]) << ',' << format_double(es.z_tilde_samples[t])
            << ',' << (es.y_samples.empty() ? std::string("NA") : format_double(es.y_samples[t])) << ','
            << format_double(es.tau_ratio_samples[t]) << '\n';
      }
      const auto ge8 = [](const std::vector<double>& v) {
        return static_cast<std::size_t>(std::count_if(v.begin(), v.end(), [](double z) { return z >= 8.0; }));
      };
      const auto in_band = std::count_if(es.tau_ratio_samples.begin(), es.tau_ratio_samples.end(),
                                         [](double v) { return v > 0.6 && v < 1.4; });
      json s;
      s["n"] = base.n;
      s["dist"] = base.dist;
      s["trials"] = ens_trials;
      s["z"] = summarize(es.z_samples);
      s["z_tilde"] = summarize(es.z_tilde_samples);
      s["z_ge_8"] = ge8(es.z_samples);
      s["z_tilde_ge_8"] = ge8(es.z_tilde_samples);
      s["ks_z_vs_z_tilde"] = ks_two_sample(es.z_samples, es.z_tilde_samples);
      s["z_histogram"] = histogram_json(es.z_samples);
      if (!es.y_samples.empty()) s["y"] = summarize(es.y_samples);
      s["tau_ratio"] = summarize(es.tau_ratio_samples);
      s["tau_ratio_in_band_fraction"] = static_cast<double>(in_band) / static_cast<double>(std::max<std::size_t>(1, ens_trials));
      dir.write_json("summary.json", s);
      out << "tracy-widom: n=" << base.n << " trials=" << ens_trials << " Z>=8: " << ge8(es.z_samples) << '\n';

    } else if (sub == abs_cmd) {
      const EnsembleSpec spec{base.n, parse_dist(base.dist), base.r, ens_trials, common.seed};
      const auto records = abs_bound_experiment(spec, m, common.threads);
      auto csv = dir.open("records.csv");
      write_abs_records_csv(csv, records);
      std::size_t s1_exc = 0, tau_exc = 0, tight_viol = 0, ratio_below = 0;
      std::vector<double> kappa, tight, s1w, ra, rb, rc;
      for (const auto& r : records) {
        s1_exc += r.exceptions.s1_ge_1;
        tau_exc += r.exceptions.tau_le_neg1;
        kappa.push_back(r.kappa_measured);
        s1w.push_back(r.s1_w);
        if (r.exceptions.any()) continue;
        tight.push_back(r.bound_tight);
        ra.push_back(r.ratio_sn);
        rb.push_back(r.ratio_s1);
        rc.push_back(r.ratio_kappa);
        tight_viol += r.kappa_measured > r.bound_tight + 1e-9;
        ratio_below += r.ratio_sn < 1.0 || r.ratio_s1 < 1.0 || r.ratio_kappa < 1.0;
      }
      json s;
      s["n"] = base.n;
      s["r"] = base.r;
      s["dist"] = base.dist;
      s["m"] = m;
      s["trials"] = ens_trials;
      s["exceptions"] = {{"s1_ge_1", s1_exc}, {"tau_le_neg1", tau_exc}};
      s["tight_bound_violations"] = tight_viol;
      s["efficiency_ratio_below_1"] = ratio_below;
      s["kappa"] = summarize(kappa);
      s["bound_tight"] = summarize(tight);
      s["s1_w"] = summarize(s1w);
      s["ratio_sn"] = summarize(ra);
      s["ratio_s1"] = summarize(rb);
      s["ratio_kappa"] = summarize(rc);
      if (base.r > 1.0) {
        const auto ac = asymptotic_constants(base.r);
        s["asymptotic"] = {{"via_tau", ac.via_tau}, {"via_s1", ac.via_s1}};
      }
      s["kappa_histogram"] = histogram_json(kappa);
      dir.write_json("summary.json", s);
      out << "ensemble-abs: tau<=-1 events " << tau_exc << ", tight-bound violations " << tight_viol << '\n';

    } else if (sub == relu_cmd) {
      const EnsembleSpec spec{base.n, parse_dist(base.dist), base.r, ens_trials, common.seed};
      const ReluExperiment ex = relu_bound_experiment(spec, m, m_tilde, theta, r_prime, common.threads);
      auto csv = dir.open("records.csv");
      write_relu_records_csv(csv, ex);
      std::size_t v1 = 0, v2 = 0, vu = 0, e1 = 0, e2 = 0;
      std::vector<double> kappa;
      for (const auto& r : ex.records) {
        v1 += r.violates_s1_variant;
        v2 += r.violates_rprime_variant;
        vu += r.violates_uniform;
        e1 += r.s1_ge_inv_r;
        e2 += r.tau_exception;
        kappa.push_back(r.kappa_measured);
      }
      const double t = static_cast<double>(std::max<std::size_t>(1, ens_trials));
      json s;
      s["n"] = base.n;
      s["r"] = base.r;
      s["m"] = m;
      s["m_tilde"] = m_tilde;
      s["theta"] = theta;
      s["r_prime"] = r_prime;
      s["nu"] = ex.nu;
      s["trials"] = ens_trials;
      s["failure_probability"] = ex.failure_probability;
      s["s1_variant"] = {{"applicable", ex.applicable_s1_variant}, {"bound", num(ex.bound_s1_variant)},
                         {"violations", v1}, {"exceptional_rate", static_cast<double>(e1) / t}};
      s["rprime_variant"] = {{"applicable", ex.applicable_rprime_variant},
                             {"bound_constant", num(ex.bound_rprime_constant)},
                             {"violations", v2}, {"exceptional_rate", static_cast<double>(e2) / t}};
      s["uniform"] = {{"applicable", ex.applicable_uniform}, {"bound", num(ex.bound_uniform)}, {"violations", vu}};
      s["kappa"] = summarize(kappa);
      dir.write_json("summary.json", s);
      out << "ensemble-relu: nu=" << format_double(ex.nu) << " violations " << v1 << "/" << v2 << "/" << vu << '\n';

    } else if (sub == edel_cmd) {
      const EdelmanResult r = edelman_check(base.n, ens_trials, common.seed, common.threads);
      auto csv = dir.open("samples.csv");
      csv << "trial,kappa_over_n\n";
      for (std::size_t t = 0; t < r.kappa_over_n_samples.size(); ++t)
        csv << t << ',' << format_double(r.kappa_over_n_samples[t]) << '\n';
      json s;
      s["n"] = base.n;
      s["trials"] = ens_trials;
      s["ks_distance"] = r.ks_distance;
      s["density_mass"] = edelman_total_mass();
      s["kappa_over_n"] = summarize(r.kappa_over_n_samples);
      dir.write_json("summary.json", s);
      out << "edelman: KS distance " << format_double(r.ks_distance) << '\n';

    } else if (sub == res_cmd) {
      const EnsembleSpec spec{base.n, parse_dist(base.dist), base.r, ens_trials, common.seed};
      const ResidualResult r = residual_improves(spec, m, common.threads);
      dir.write_json("summary.json", {{"n", base.n}, {"r", base.r}, {"m", m}, {"trials", r.trials},
                                      {"improved", r.improved},
                                      {"improvement_fraction", r.improvement_fraction()},
                                      {"sufficient", r.sufficient},
                                      {"sufficient_fraction", r.sufficient_fraction()},
                                      {"sufficient_counterexamples", r.sufficient_counterexamples}});
      out << "residual: improvement fraction " << format_double(r.improvement_fraction()) << '\n';

    } else if (sub == fig9_cmd) {
      const Vector grid = parse_grid(fig9_grid);
      const Fig9Result res = fig9_experiment(common.seed, grid, runs, common.threads);
      json run_info = json::array();
      for (std::size_t r = 0; r < res.runs.size(); ++r) {
        const Fig9Run& run = res.runs[r];
        auto csv = dir.open("run_" + std::to_string(r) + ".csv");
        csv << "rho,s1_Q,s_star_Q,kappa_Q\n";
        for (std::size_t k = 0; k < grid.size(); ++k)
          csv << format_double(run.rho[k]) << ',' << format_double(run.s1_q[k]) << ','
              << format_double(run.s_star_q[k]) << ',' << format_double(run.kappa_q[k]) << '\n';
        const std::string net_dir = "net_" + std::to_string(r);
        write_network_snapshot(dir.path() / net_dir, run.net);
        dir.note(net_dir + "/network.json");
        run_info.push_back({{"run", r}, {"signature_constant", run.signature_constant},
                            {"head_mask_flips", run.head_mask_flips}});
      }
      // Profiles at the grid points nearest to 0, 1/3, 2/3 and 1 of the range.
      std::vector<std::size_t> picks;
      for (double f : {0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0}) {
        const auto k = static_cast<std::size_t>(std::lround(f * static_cast<double>(grid.size() - 1)));
        if (std::find(picks.begin(), picks.end(), k) == picks.end()) picks.push_back(k);
      }
      json profiles = json::array();
      for (std::size_t k : picks) {
        if (res.runs.empty()) break;
        const RatioProfile p = ratio_profile(res, k);
        const std::string name = "profile_" + std::to_string(k) + ".csv";
        auto csv = dir.open(name);
        csv << "i,ratio_mean,ratio_std\n";
        for (std::size_t i = 0; i < p.ratio_mean.size(); ++i)
          csv << i + 1 << ',' << format_double(p.ratio_mean[i]) << ',' << format_double(p.ratio_std[i]) << '\n';
        profiles.push_back({{"grid_index", k}, {"rho", p.rho}, {"file", name}});
      }
      json means = json::array();
      for (std::size_t k = 0; k < grid.size() && !res.runs.empty(); ++k) {
        std::vector<double> a, b, c;
        for (const auto& run : res.runs) {
          a.push_back(run.s1_q[k]);
          b.push_back(run.s_star_q[k]);
          c.push_back(run.kappa_q[k]);
        }
        means.push_back({{"rho", grid[k]}, {"s1_Q", mean(a)}, {"s_star_Q", mean(b)}, {"kappa_Q", mean(c)}});
      }
      dir.write_json("summary.json", {{"runs", run_info}, {"profiles", profiles}, {"mean_by_rho", means}});
      out << "fig9: " << runs << " runs on " << grid.size() << " grid points\n";
    }

    write_manifest(dir, *sub, common.seed);
    return kOk;
  } catch (const HypothesisError& e) {
    err << "hypothesis violated: " << e.what() << '\n';
    return kHypothesis;
  } catch (const FormatError& e) {
    err << "I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const fs::filesystem_error& e) {
    err << "I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::domain_error& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const CLI::Error& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  }
}

}  // namespace svp::cli
