// Batch front-end: parse a JSON config, run the band/gap + action pipeline and emit
// machine-readable reports. Exit codes: 0 success / all pass, 1 identity-or-inequality
// failure, 2 config error, 3 numerical or structural failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "kdvact/actions.hpp"
#include "kdvact/hill.hpp"
#include "kdvact/numerics.hpp"
#include "kdvact/potential.hpp"
#include "kdvact/verify.hpp"

namespace {

using nlohmann::ordered_json;

constexpr const char* kVersion = "0.1.0";

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CorpusConfig {
  int size = 10;
  int max_modes = 4;
  double coeff_range = 2.0;
  std::uint64_t seed = kdvact::kCorpusSeed;
};

struct RunConfig {
  kdvact::Potential potential;
  kdvact::VerifyOptions verify;
  std::vector<double> scan_amplitudes;
  std::optional<kdvact::Potential> hessian_family_a, hessian_family_b;
  double hessian_a0 = 1e-2, hessian_b0 = 1e-2, hessian_step = 2e-3;
  std::optional<CorpusConfig> corpus;
};

double require_number(const ordered_json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError("config error at " + path + ": expected a number");
  return j.get<double>();
}

Eigen::VectorXd number_array(const ordered_json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError("config error at " + path + ": expected an array");
  Eigen::VectorXd v(j.size());
  for (size_t i = 0; i < j.size(); ++i) {
    v[i] = require_number(j[i], path + "[" + std::to_string(i) + "]");
    if (!std::isfinite(v[i])) {
      throw ConfigError("config error at " + path + "[" + std::to_string(i) +
                        "]: not a finite number");
    }
  }
  return v;
}

kdvact::Potential parse_potential(const ordered_json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError("config error at " + path + ": expected an object");
  Eigen::VectorXd cos = j.contains("cos") ? number_array(j["cos"], path + ".cos")
                                          : Eigen::VectorXd(0);
  Eigen::VectorXd sin = j.contains("sin") ? number_array(j["sin"], path + ".sin")
                                          : Eigen::VectorXd(0);
  const int m = static_cast<int>(std::max(cos.size(), sin.size()));
  Eigen::VectorXd a = Eigen::VectorXd::Zero(m), b = Eigen::VectorXd::Zero(m);
  a.head(cos.size()) = cos;
  b.head(sin.size()) = sin;
  try {
    return kdvact::make_potential(a, b);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("config error at " + path + ": " + e.what());
  }
}

double tolerance_field(const ordered_json& block, const std::string& key,
                       const std::string& path, double fallback) {
  if (!block.contains(key)) return fallback;
  const double v = require_number(block[key], path + "." + key);
  if (!(v > 0.0 && v <= 1e-3)) {
    throw ConfigError("config error at " + path + "." + key + ": must lie in (0, 1e-3]");
  }
  return v;
}

RunConfig parse_config(const ordered_json& j) {
  if (!j.is_object()) throw ConfigError("config error at <root>: expected an object");
  RunConfig cfg;
  if (!j.contains("potential")) throw ConfigError("config error at potential: missing");
  cfg.potential = parse_potential(j["potential"], "potential");

  kdvact::SpectrumOptions& s = cfg.verify.spectrum;
  if (j.contains("gaps")) {
    const auto& g = j["gaps"];
    if (!g.is_object()) throw ConfigError("config error at gaps: expected an object");
    if (g.contains("max")) {
      if (g["max"].is_string()) {
        if (g["max"].get<std::string>() != "auto") {
          throw ConfigError("config error at gaps.max: expected an integer or \"auto\"");
        }
        s.gap_count = -1;
      } else if (g["max"].is_number_integer()) {
        s.gap_count = g["max"].get<int>();
        if (s.gap_count < 1) throw ConfigError("config error at gaps.max: must be >= 1");
      } else {
        throw ConfigError("config error at gaps.max: expected an integer or \"auto\"");
      }
    }
    s.tail_rel_tol = tolerance_field(g, "tail_rel_tol", "gaps", s.tail_rel_tol);
    s.closure_tol = tolerance_field(g, "closure_tol", "gaps", s.closure_tol);
  }
  if (j.contains("tolerances")) {
    const auto& t = j["tolerances"];
    if (!t.is_object()) throw ConfigError("config error at tolerances: expected an object");
    s.ode_tol = tolerance_field(t, "ode", "tolerances", s.ode_tol);
    s.root_tol = tolerance_field(t, "root", "tolerances", s.root_tol);
    s.quad_tol = tolerance_field(t, "quad", "tolerances", s.quad_tol);
  }
  if (j.contains("scan")) {
    const auto& sc = j["scan"];
    if (!sc.is_object() || !sc.contains("amplitudes")) {
      throw ConfigError("config error at scan.amplitudes: missing");
    }
    const Eigen::VectorXd amps = number_array(sc["amplitudes"], "scan.amplitudes");
    cfg.scan_amplitudes.assign(amps.data(), amps.data() + amps.size());
  }
  if (j.contains("hessian")) {
    const auto& hs = j["hessian"];
    if (!hs.is_object()) throw ConfigError("config error at hessian: expected an object");
    if (hs.contains("family_a")) cfg.hessian_family_a = parse_potential(hs["family_a"], "hessian.family_a");
    if (hs.contains("family_b")) cfg.hessian_family_b = parse_potential(hs["family_b"], "hessian.family_b");
    if (hs.contains("a0")) cfg.hessian_a0 = require_number(hs["a0"], "hessian.a0");
    if (hs.contains("b0")) cfg.hessian_b0 = require_number(hs["b0"], "hessian.b0");
    if (hs.contains("step")) cfg.hessian_step = require_number(hs["step"], "hessian.step");
    if (!(cfg.hessian_step > 0.0)) throw ConfigError("config error at hessian.step: must be > 0");
  }
  if (j.contains("corpus")) {
    const auto& c = j["corpus"];
    if (!c.is_object()) throw ConfigError("config error at corpus: expected an object");
    CorpusConfig cc;
    if (c.contains("size")) cc.size = static_cast<int>(require_number(c["size"], "corpus.size"));
    if (c.contains("max_modes")) {
      cc.max_modes = static_cast<int>(require_number(c["max_modes"], "corpus.max_modes"));
    }
    if (c.contains("coeff_range")) {
      cc.coeff_range = require_number(c["coeff_range"], "corpus.coeff_range");
    }
    if (c.contains("seed")) cc.seed = c["seed"].get<std::uint64_t>();
    if (cc.size < 1 || cc.max_modes < 1 || !(cc.coeff_range > 0.0)) {
      throw ConfigError("config error at corpus: size/max_modes/coeff_range out of range");
    }
    cfg.corpus = cc;
  }
  return cfg;
}

std::string fmt17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

ordered_json potential_json(const kdvact::Potential& q) {
  ordered_json j;
  j["cos"] = std::vector<double>(q.cos_coeffs.data(), q.cos_coeffs.data() + q.modes());
  j["sin"] = std::vector<double>(q.sin_coeffs.data(), q.sin_coeffs.data() + q.modes());
  return j;
}

ordered_json spectrum_json(const kdvact::BandGapSpectrum& spec) {
  ordered_json j;
  j["q0"] = spec.q0;
  j["N"] = spec.N;
  j["lambda0_plus"] = 0.0;
  j["tail_estimate"] = spec.tail_estimate;
  ordered_json edges = ordered_json::array();
  for (const auto& [lo, hi] : spec.edges) edges.push_back({lo, hi});
  j["edges"] = edges;
  ordered_json gaps = ordered_json::array();
  for (const auto& g : spec.gaps) {
    ordered_json gj;
    gj["n"] = g.n;
    gj["closed"] = g.closed;
    gj["lambda_minus"] = g.lambda_minus;
    gj["lambda_plus"] = g.lambda_plus;
    gj["z_minus"] = g.z_minus;
    gj["z_plus"] = g.z_plus;
    gj["gamma_len"] = g.gamma_len;
    gj["g_len"] = g.g_len;
    gj["z_crit"] = g.z_crit;
    gj["h"] = g.h;
    gj["sigma_len"] = g.sigma_len;
    gj["rho"] = g.rho;
    gj["refined"] = g.delta_refined;
    gaps.push_back(gj);
  }
  j["gaps"] = gaps;
  return j;
}

ordered_json moments_json(const kdvact::ActionMomentSet& m) {
  ordered_json j;
  j["P_minus1"] = m.P_minus1;
  j["P_1"] = m.P_1;
  j["P_3"] = m.P_3;
  j["Q0"] = m.Q0;
  j["Q2"] = m.Q2;
  j["Q4"] = m.Q4;
  j["S_minus1"] = m.S_minus1;
  j["S_0"] = m.S_0;
  j["S_1"] = m.S_1;
  j["W"] = m.W;
  j["h_inf"] = m.h_inf;
  j["h_l2"] = m.h_l2;
  j["rho_l2"] = m.rho_l2;
  j["C0"] = m.C0;
  j["C_I"] = m.C_I;
  j["C_minus"] = m.C_minus;
  j["i_norm_sq"] = m.i_norm_sq;
  j["tail_rel"] = m.tail_rel;
  j["quality_warning"] = m.quality_warning;
  return j;
}

ordered_json actions_json(const kdvact::ActionMomentSet& m) {
  ordered_json j;
  j["I"] = std::vector<double>(m.I.data(), m.I.data() + m.I.size());
  j["V_terms"] = std::vector<double>(m.V_terms.data(), m.V_terms.data() + m.V_terms.size());
  return j;
}

ordered_json identities_json(const kdvact::IdentityReport& rep) {
  ordered_json j;
  ordered_json entries = ordered_json::array();
  for (const auto& e : rep.entries) {
    ordered_json ej;
    ej["name"] = e.name;
    ej["lhs"] = e.lhs;
    ej["rhs"] = e.rhs;
    ej["rel_residual"] = e.rel_residual;
    ej["tol"] = e.tol;
    ej["pass"] = e.pass;
    ej["tail_rel"] = e.tail_rel;
    entries.push_back(ej);
  }
  j["entries"] = entries;
  j["all_pass"] = rep.all_pass;
  j["reliable"] = rep.reliable;
  return j;
}

ordered_json inequalities_json(const kdvact::InequalityReport& rep) {
  ordered_json j;
  ordered_json entries = ordered_json::array();
  for (const auto& e : rep.entries) {
    ordered_json ej;
    ej["name"] = e.name;
    ej["margin"] = e.margin;
    ej["scale"] = e.scale;
    ej["pass"] = e.pass;
    ej["argmin_gap"] = e.argmin_gap;
    entries.push_back(ej);
  }
  j["entries"] = entries;
  ordered_json pg;
  for (const auto& [name, vals] : rep.per_gap) pg[name] = vals;
  j["per_gap"] = pg;
  j["skipped_gaps"] = rep.skipped_gaps;
  j["all_pass"] = rep.all_pass;
  return j;
}

ordered_json meta_json(const std::string& command, const RunConfig& cfg, double tail_rel) {
  const kdvact::SpectrumOptions& s = cfg.verify.spectrum;
  ordered_json j;
  j["version"] = kVersion;
  j["command"] = command;
  ordered_json tol;
  tol["ode"] = s.ode_tol;
  tol["root"] = s.root_tol;
  tol["quad"] = s.quad_tol;
  j["tolerances"] = tol;
  ordered_json gaps;
  gaps["max"] = s.gap_count < 0 ? ordered_json("auto") : ordered_json(s.gap_count);
  gaps["tail_rel_tol"] = s.tail_rel_tol;
  gaps["closure_tol"] = s.closure_tol;
  j["gaps"] = gaps;
  j["tail_rel"] = tail_rel;
  return j;
}

void write_output(const std::string& out_path, const std::string& body) {
  if (out_path == "-" || out_path.empty()) {
    std::cout << body;
    return;
  }
  std::ofstream f(out_path, std::ios::binary);
  if (!f) throw ConfigError("config error at --out: cannot open '" + out_path + "'");
  f << body;
}

int run_verify_single(const RunConfig& cfg, ordered_json& doc) {
  const kdvact::BandGapSpectrum spec = band_edges(cfg.potential, cfg.verify.spectrum);
  const kdvact::ActionMomentSet mom = moments(cfg.potential, spec);
  const kdvact::IdentityReport ids = identity_report(cfg.potential, cfg.verify);
  const kdvact::InequalityReport ineq = inequality_report(cfg.potential, cfg.verify);

  doc["spectrum"] = spectrum_json(spec);
  doc["actions"] = actions_json(mom);
  doc["moments"] = moments_json(mom);
  doc["identities"] = identities_json(ids);
  doc["inequalities"] = inequalities_json(ineq);
  doc["meta"] = meta_json("verify", cfg, spec.tail_estimate);

  const bool identity_fail = ids.reliable && !ids.all_pass;
  const bool inequality_fail = !ineq.all_pass;
  return (identity_fail || inequality_fail) ? 1 : 0;
}

int run_verify_corpus(const RunConfig& cfg, std::uint64_t seed, ordered_json& doc) {
  const CorpusConfig& cc = *cfg.corpus;
  const auto corpus = kdvact::corpus_potentials(seed, cc.size, cc.max_modes, cc.coeff_range);
  ordered_json members = ordered_json::array();
  int exit_code = 0;
  for (size_t i = 0; i < corpus.size(); ++i) {
    const kdvact::IdentityReport ids = identity_report(corpus[i], cfg.verify);
    const kdvact::InequalityReport ineq = inequality_report(corpus[i], cfg.verify);
    ordered_json mj;
    mj["index"] = i;
    mj["potential"] = potential_json(corpus[i]);
    mj["identities"] = identities_json(ids);
    mj["inequalities"] = inequalities_json(ineq);
    members.push_back(mj);
    if ((ids.reliable && !ids.all_pass) || !ineq.all_pass) exit_code = 1;
  }
  doc["corpus"] = members;
  ordered_json meta = meta_json("verify", cfg, 0.0);
  meta["seed"] = seed;
  doc["meta"] = meta;
  return exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Band/gap spectra of the periodic Hill operator, KdV action moments and the"
               " identity/inequality verification reports"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_path = "-";
  std::string format;
  int gaps_override = 0;
  std::uint64_t seed = 0;
  bool seed_given = false;
  app.add_option("--config", config_path, "path to the JSON run configuration")->required();
  app.add_option("--out", out_path, "output path (default stdout)");
  app.add_option("--format", format, "json|csv where applicable")
      ->check(CLI::IsMember({"json", "csv"}));
  app.add_option("--gaps", gaps_override, "override the configured gap count")
      ->check(CLI::Range(1, 1000));
  app.add_option("--seed", seed, "corpus seed (corpus-driven verify runs)")
      ->each([&](const std::string&) { seed_given = true; });

  for (auto* sub : {app.add_subcommand("spectrum", "emit the normalized band/gap spectrum"),
                    app.add_subcommand("actions", "emit actions and gap-integral moments"),
                    app.add_subcommand("verify", "emit identity and inequality reports"),
                    app.add_subcommand("scan", "amplitude scan of the quadratic normal form"),
                    app.add_subcommand("hessian", "2x2 action-space Hessian estimate"),
                    app.add_subcommand("profile", "per-gap (z, v) height profile samples")}) {
    sub->fallthrough();  // global flags may follow the subcommand name
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    std::ifstream in(config_path);
    if (!in) {
      std::cerr << "config error at --config: cannot open '" << config_path << "'\n";
      return 2;
    }
    ordered_json raw;
    try {
      in >> raw;
    } catch (const nlohmann::json::exception& e) {
      std::cerr << "config error at <root>: " << e.what() << "\n";
      return 2;
    }
    RunConfig cfg = parse_config(raw);
    if (gaps_override != 0) {
      if (gaps_override < 1) {
        std::cerr << "config error at --gaps: must be >= 1\n";
        return 2;
      }
      cfg.verify.spectrum.gap_count = gaps_override;
    }

    if (format == "csv" &&
        (command == "spectrum" || command == "actions" || command == "verify")) {
      std::cerr << "config error at --format: csv is not applicable to '" << command << "'\n";
      return 2;
    }

    std::ostringstream body;
    int exit_code = 0;

    if (command == "spectrum") {
      const auto spec = band_edges(cfg.potential, cfg.verify.spectrum);
      ordered_json doc;
      doc["spectrum"] = spectrum_json(spec);
      doc["meta"] = meta_json(command, cfg, spec.tail_estimate);
      body << doc.dump(2) << "\n";
    } else if (command == "actions") {
      const auto spec = band_edges(cfg.potential, cfg.verify.spectrum);
      const auto mom = moments(cfg.potential, spec);
      ordered_json doc;
      doc["spectrum"] = spectrum_json(spec);
      doc["actions"] = actions_json(mom);
      doc["moments"] = moments_json(mom);
      doc["meta"] = meta_json(command, cfg, spec.tail_estimate);
      body << doc.dump(2) << "\n";
    } else if (command == "verify") {
      ordered_json doc;
      if (cfg.corpus) {
        const std::uint64_t use_seed = seed_given ? seed : cfg.corpus->seed;
        exit_code = run_verify_corpus(cfg, use_seed, doc);
      } else {
        exit_code = run_verify_single(cfg, doc);
      }
      body << doc.dump(2) << "\n";
    } else if (command == "scan") {
      if (cfg.scan_amplitudes.empty()) {
        std::cerr << "config error at scan.amplitudes: missing\n";
        return 2;
      }
      const auto rows = quadratic_scan(cfg.potential, cfg.scan_amplitudes, cfg.verify);
      if (format == "json") {
        ordered_json arr = ordered_json::array();
        for (const auto& r : rows) {
          ordered_json rj;
          rj["amplitude"] = r.amplitude;
          rj["i_norm_sq"] = r.i_norm_sq;
          rj["V"] = r.V;
          rj["ratio"] = r.ratio;
          arr.push_back(rj);
        }
        ordered_json doc;
        doc["scan"] = arr;
        doc["meta"] = meta_json(command, cfg, 0.0);
        body << doc.dump(2) << "\n";
      } else {
        body << "amplitude,i_norm_sq,V,ratio\n";
        for (const auto& r : rows) {
          body << fmt17(r.amplitude) << "," << fmt17(r.i_norm_sq) << "," << fmt17(r.V) << ","
               << fmt17(r.ratio) << "\n";
        }
      }
    } else if (command == "hessian") {
      if (!cfg.hessian_family_a || !cfg.hessian_family_b) {
        std::cerr << "config error at hessian.family_a/family_b: missing\n";
        return 2;
      }
      const auto est = hessian_check(*cfg.hessian_family_a, *cfg.hessian_family_b,
                                     cfg.hessian_a0, cfg.hessian_b0, cfg.hessian_step,
                                     cfg.verify);
      if (format == "csv") {
        body << "h11,h12,h21,h22,eig1,eig2,positive_definite,jacobian_cond,tail_fraction\n";
        body << fmt17(est.hessian(0, 0)) << "," << fmt17(est.hessian(0, 1)) << ","
             << fmt17(est.hessian(1, 0)) << "," << fmt17(est.hessian(1, 1)) << ","
             << fmt17(est.eigenvalues(0)) << "," << fmt17(est.eigenvalues(1)) << ","
             << (est.positive_definite ? 1 : 0) << "," << fmt17(est.jacobian_cond) << ","
             << fmt17(est.tail_fraction) << "\n";
      } else {
        ordered_json doc;
        ordered_json hj;
        hj["matrix"] = {{est.hessian(0, 0), est.hessian(0, 1)},
                        {est.hessian(1, 0), est.hessian(1, 1)}};
        hj["eigenvalues"] = {est.eigenvalues(0), est.eigenvalues(1)};
        hj["positive_definite"] = est.positive_definite;
        hj["jacobian_cond"] = est.jacobian_cond;
        hj["tail_fraction"] = est.tail_fraction;
        doc["hessian"] = hj;
        doc["meta"] = meta_json(command, cfg, 0.0);
        body << doc.dump(2) << "\n";
      }
    } else if (command == "profile") {
      const auto spec = band_edges(cfg.potential, cfg.verify.spectrum);
      const auto points = gap_profile(cfg.potential, spec);
      if (format == "json") {
        ordered_json arr = ordered_json::array();
        for (const auto& p : points) {
          ordered_json pj;
          pj["gap"] = p.n;
          pj["z"] = p.z;
          pj["v"] = p.v;
          arr.push_back(pj);
        }
        ordered_json doc;
        doc["profile"] = arr;
        doc["meta"] = meta_json(command, cfg, spec.tail_estimate);
        body << doc.dump(2) << "\n";
      } else {
        body << "gap,z,v\n";
        for (const auto& p : points) {
          body << p.n << "," << fmt17(p.z) << "," << fmt17(p.v) << "\n";
        }
      }
    }

    write_output(out_path, body.str());
    return exit_code;
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const kdvact::StructuralError& e) {
    std::cerr << "structural failure: " << e.what() << "\n";
    return 3;
  } catch (const kdvact::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 3;
  }
}
