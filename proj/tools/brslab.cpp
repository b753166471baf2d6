// brslab command-line front end.
//
// Exit status: 0 success, 1 falsified property (witness in the JSON output),
// 2 usage or configuration error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include <nlohmann/json.hpp>

#include "brslab/brslab.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace brslab;

namespace {

constexpr int kOk = 0;
constexpr int kFalsified = 1;
constexpr int kUsage = 2;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Context {
  json cfg;
  std::uint64_t seed = 0;
  int workers = 1;
  fs::path out;
  std::string hash;
};

const std::set<std::string> kTopKeys{"system",     "eta_source", "seed",      "radius",   "horizon",
                                     "samples",    "integrator", "simulate",  "probe",    "rfc",
                                     "lyapunov",   "output_dir", "lift_grid_density"};

void validate_config(const json& cfg) {
  if (!cfg.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [k, v] : cfg.items())
    if (!kTopKeys.count(k)) throw ConfigError("unknown config key '" + k + "'");
  if (!cfg.contains("system") || !cfg["system"].contains("name"))
    throw ConfigError("config requires system.name");
  const auto src = cfg.value("eta_source", std::string("paper"));
  if (src != "paper" && src != "from_fit") throw ConfigError("eta_source must be 'paper' or 'from_fit'");
}

Vec vec_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  Vec out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
  return out;
}

json vec_to_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

InputSignal input_from_json(const json& j, int dim) {
  if (j.is_null()) return InputSignal::zero(dim);
  std::vector<Vec> vals;
  for (const auto& v : j.at("values")) vals.push_back(vec_from_json(v));
  return InputSignal(j.value("breakpoints", std::vector<double>{}), std::move(vals));
}

IntegratorConfig integrator_from(const json& cfg, IntegratorConfig base) {
  if (!cfg.contains("integrator")) return base;
  const auto& j = cfg["integrator"];
  base.rel_tol = j.value("rel_tol", base.rel_tol);
  base.abs_tol = j.value("abs_tol", base.abs_tol);
  base.max_step = j.value("max_step", base.max_step);
  base.blowup_threshold = j.value("blowup_threshold", base.blowup_threshold);
  base.validate();
  return base;
}

void emit(const Context& ctx, const std::string& file, json body) {
  body["config_hash"] = ctx.hash;
  body["seed"] = ctx.seed;
  fs::create_directories(ctx.out);
  std::ofstream f(ctx.out / file);
  if (!f) throw std::runtime_error("cannot write " + (ctx.out / file).string());
  f << body.dump(2) << "\n";
  std::cout << body.dump() << "\n";
}

examples::Example load_example(const Context& ctx) {
  const auto& s = ctx.cfg["system"];
  auto ex = examples::make(s["name"].get<std::string>(), s.value("params", json::object()));
  ex.integrator = integrator_from(ctx.cfg, ex.integrator);
  return ex;
}

TdiConfig tdi_from(const Context& ctx, const examples::Example& ex) {
  TdiConfig t;
  t.integrator = ex.integrator;
  t.grid_density = ctx.cfg.value("lift_grid_density", t.grid_density);
  t.workers = ctx.workers;
  return t;
}

// eta from the registry, or from an additive reach-bound fit.
GrowthMargin resolve_eta(const Context& ctx, const examples::Example& ex) {
  if (ctx.cfg.value("eta_source", std::string("paper")) == "paper") return ex.eta;
  ReachConfig rc;
  rc.integrator = ex.integrator;
  rc.workers = ctx.workers;
  const auto samples = sample_reach(ex.sys, ctx.cfg.value("radius", 2.0), ctx.cfg.value("horizon", 5.0),
                                    ctx.cfg.value("samples", 200), ctx.seed, rc);
  const auto fit = fit_additive_bound(samples);
  return GrowthMargin(eta_from_chis(fit.chi1, fit.chi2, fit.chi3));
}

int cmd_simulate(const Context& ctx) {
  const auto ex = load_example(ctx);
  const auto& s = ctx.cfg.at("simulate");
  const Vec x0 = vec_from_json(s.at("x0"));
  const InputSignal u = input_from_json(s.value("u", json()), ex.sys.input_dim());
  const double tau = s.at("tau").get<double>();
  IntegratorConfig ic = ex.integrator;
  if (s.contains("grid_density"))
    ic.dense_output_grid = time_grid(tau, s["grid_density"].get<int>());
  const auto tr = integrate(ex.sys, x0, u, tau, ic);
  fs::create_directories(ctx.out);
  io::save_trajectory(ctx.out / "simulate.csv", tr);
  emit(ctx, "simulate.json",
       {{"command", "simulate"},
        {"csv", "simulate.csv"},
        {"final_time", tr.final_time()},
        {"final_state", vec_to_json(tr.final_state())},
        {"trajectory", io::trajectory_sidecar(tr)}});
  return kOk;
}

int cmd_brs_fit(const Context& ctx) {
  const auto ex = load_example(ctx);
  ReachConfig rc;
  rc.integrator = ex.integrator;
  rc.workers = ctx.workers;
  const double C = ctx.cfg.value("radius", 2.0), tau = ctx.cfg.value("horizon", 5.0);
  const auto samples = sample_reach(ex.sys, C, tau, ctx.cfg.value("samples", 200), ctx.seed, rc);
  fs::create_directories(ctx.out);
  {
    std::ofstream f(ctx.out / "reach_samples.csv");
    io::write_reach_csv(f, samples);
  }
  try {
    const auto fit = fit_additive_bound(samples);
    const auto fresh = sample_reach(ex.sys, C, tau, ctx.cfg.value("samples", 200), split_seed(ctx.seed, 99), rc);
    const auto gen = evaluate_fit(fit, fresh);
    emit(ctx, "brs_fit.json",
         {{"command", "brs fit"},
          {"fit", fit},
          {"generalization",
           {{"points", gen.points},
            {"violation_fraction", gen.violation_fraction},
            {"max_relative_violation", gen.max_relative_violation}}}});
    return kOk;
  } catch (const NotBrsError& e) {
    json witness;
    for (const auto& s : samples)
      if (!std::isfinite(s.norm_phi)) {
        witness = {{"t", s.t}, {"norm_x", s.norm_x}, {"norm_u", s.norm_u}};
        break;
      }
    emit(ctx, "brs_fit.json", {{"command", "brs fit"}, {"falsified", e.what()}, {"witness", witness}});
    return kFalsified;
  }
}

int cmd_rfc_verify(const Context& ctx) {
  const auto ex = load_example(ctx);
  const auto eta = resolve_eta(ctx, ex);
  const auto r = ctx.cfg.value("rfc", json::object());
  const double C = ctx.cfg.value("radius", 2.0), tau = ctx.cfg.value("horizon", 5.0);
  const auto n = r.value("samples", ctx.cfg.value("samples", 50));
  const auto offsets = r.value("offsets", std::vector<double>{0.0, 1.0, 2.0, 4.0, 8.0});
  const auto tdi = tdi_from(ctx, ex);
  json tried = json::array();
  std::optional<RfcReport> pass, last;
  for (double c : offsets) {
    last = verify_rfc_tdi(ex.sys, eta, eta.fun(), c, C, tau, n, ctx.seed, tdi);
    tried.push_back(*last);
    if (last->holds) {
      pass = last;
      break;
    }
  }
  json body{{"command", "rfc verify"}, {"tried", tried}};
  if (pass) {
    body["c"] = pass->c;
    emit(ctx, "rfc_verify.json", body);
    return kOk;
  }
  body["falsified"] = "no offset in the sweep bounds the sampled trajectories";
  if (last) body["witness"] = {{"t", last->worst_t}, {"norm_x", last->worst_norm_x}, {"violation", last->max_violation}};
  emit(ctx, "rfc_verify.json", body);
  return kFalsified;
}

int cmd_lipschitz_probe(const Context& ctx, const std::string& mode) {
  const auto ex = load_example(ctx);
  const auto p = ctx.cfg.value("probe", json::object());
  const double tau = p.value("tau", 1.0), C = p.value("C", 1.0);
  const std::size_t pairs = p.value("pairs", 32);
  ProbeConfig pc;
  pc.tdi = tdi_from(ctx, ex);
  pc.ratio_cap = p.value("ratio_cap", pc.ratio_cap);
  if (p.contains("input")) pc.fixed_input = input_from_json(p["input"], ex.sys.input_dim());
  LipschitzProbeReport rep;
  json body{{"command", "lipschitz probe"}, {"mode", mode}};
  if (mode == "open") {
    rep = probe_lipschitz_openloop(ex.sys, tau, C, pairs, ctx.seed, pc);
  } else {
    const auto eta = resolve_eta(ctx, ex);
    rep = probe_lipschitz_tdi(ex.sys, eta, tau, C, pairs, ctx.seed, pc);
    if (ex.sys.lipschitz_hint()) {
      double M = 1.0, lambda = 0.0;
      if (ex.sys.linear_part()) {
        const auto g = semigroup_growth(*ex.sys.linear_part());
        M = g.M;
        lambda = g.lambda;
      }
      const double L = ex.sys.lipschitz_hint()(C);
      body["gronwall"] = {{"M_sg", M}, {"lambda_sg", lambda}, {"L_rhs", L},
                          {"bound", gronwall_envelope(M, lambda, L, tau)}};
    }
  }
  body["report"] = rep;
  emit(ctx, "lipschitz_probe.json", body);
  return kOk;
}

struct LyapSetup {
  examples::Example ex;
  GrowthMargin eta;
  LyapunovConfig lc;
  std::vector<double> M;
  double max_radius;
  int points;
};

LyapSetup lyap_setup(const Context& ctx) {
  auto ex = load_example(ctx);
  auto eta = resolve_eta(ctx, ex);
  const auto l = ctx.cfg.value("lyapunov", json::object());
  LyapunovConfig lc;
  lc.seed = ctx.seed;
  lc.workers = ctx.workers;
  lc.integrator = ex.integrator;
  lc.n_dist = l.value("n_dist", lc.n_dist);
  lc.time_grid_density = l.value("time_grid_density", lc.time_grid_density);
  lc.tail_tol = l.value("tail_tol", lc.tail_tol);
  lc.tol_growth = l.value("tol_growth", lc.tol_growth);
  lc.abs_slack = l.value("abs_slack", lc.abs_slack);
  lc.c = l.value("c", lc.c);
  const double max_radius = l.value("max_radius", 2.0);
  lc.Q = l.value("Q", 0);
  if (lc.Q < 1) lc.Q = min_admissible_Q(max_radius, lc.c, lc.tail_tol);
  lc.validate();
  ProbeConfig pc;
  pc.tdi = tdi_from(ctx, ex);
  const auto table = build_l_table(ex.sys, eta, lc.Q, lc.c, l.value("l_pairs", 16), ctx.seed, pc);
  auto M = m_table(table, lc.Q, lc.c);
  return {std::move(ex), std::move(eta), lc, std::move(M), max_radius, l.value("radial_points", 21)};
}

Vec radial_point(int dim, double r) {
  Vec x = Vec::Zero(dim);
  x[0] = r;
  return x;
}

int cmd_lyapunov_build(const Context& ctx) {
  try {
    const auto st = lyap_setup(ctx);
    const auto sw = sandwich_funs(st.eta, st.M, st.lc.c, st.lc.Q, st.max_radius);
    std::vector<io::LyapunovRow> rows;
    for (int i = 0; i < st.points; ++i) {
      const double r = st.points > 1 ? st.max_radius * i / (st.points - 1) : 0.0;
      const Vec x = radial_point(st.ex.sys.state_dim(), r);
      const auto v = eval_V_with(st.ex.sys, st.eta, x, std::max(r, 1.0), st.lc, st.M);
      rows.push_back({r, v.V, v.W, v.tail_bound, sw.alpha1(r), sw.alpha2(r) + sw.C});
    }
    fs::create_directories(ctx.out);
    {
      std::ofstream f(ctx.out / "lyapunov_table.csv");
      io::write_lyapunov_csv(f, rows);
    }
    emit(ctx, "lyapunov_manifest.json",
         {{"command", "lyapunov build"},
          {"config", ctx.cfg},
          {"Q", st.lc.Q},
          {"c", st.lc.c},
          {"M_table", st.M},
          {"csv", "lyapunov_table.csv"},
          {"lower_bound_certificate", true}});
    return kOk;
  } catch (const NotRfcTdiError& e) {
    emit(ctx, "lyapunov_manifest.json", {{"command", "lyapunov build"}, {"falsified", e.what()}});
    return kFalsified;
  }
}

int cmd_lyapunov_verify(const Context& ctx) {
  try {
    const auto st = lyap_setup(ctx);
    const auto sw = sandwich_funs(st.eta, st.M, st.lc.c, st.lc.Q, st.max_radius);
    json sandwich = json::array();
    json witness;
    bool ok = true;
    for (int i = 0; i < st.points; ++i) {
      const double r = st.points > 1 ? st.max_radius * i / (st.points - 1) : 0.0;
      const auto v = eval_V_with(st.ex.sys, st.eta, radial_point(st.ex.sys.state_dim(), r), std::max(r, 1.0),
                                 st.lc, st.M);
      const double lo = sw.alpha1(r), hi = sw.alpha2(r) + sw.C;
      const bool pass = lo <= v.V && v.V <= hi;
      sandwich.push_back({{"norm_x", r}, {"V", v.V}, {"alpha1", lo}, {"alpha2_plus_C", hi}, {"pass", pass}});
      if (!pass && witness.is_null()) witness = sandwich.back();
      ok = ok && pass;
    }
    const auto l = ctx.cfg.value("lyapunov", json::object());
    const int want = l.value("growth_pairs", 100);
    Rng rng(split_seed(ctx.seed, 17));
    const auto chi = chi_from_eta(st.eta.fun());
    json growth = json::array();
    int checked = 0, vacuous = 0;
    for (int attempt = 0; checked < want && attempt < 20 * want; ++attempt) {
      const double r = rng.uniform(0.1, st.max_radius);
      Vec x = rng.unit_vector(st.ex.sys.state_dim()) * r;
      Vec u = rng.unit_vector(st.ex.sys.input_dim()) * rng.uniform(0.0, st.eta(r));
      const auto g = verify_growth(st.ex.sys, st.eta, x, u, st.lc, st.M, chi);
      if (g.vacuous()) {
        ++vacuous;
        continue;
      }
      ++checked;
      if (!g.pass()) {
        ok = false;
        if (witness.is_null()) witness = {{"x", vec_to_json(x)}, {"u", vec_to_json(u)}, {"report", g}};
      }
      growth.push_back({{"norm_x", r}, {"dini_V", g.dini_V}, {"V", g.V}, {"dini_W", g.dini_W}, {"pass", g.pass()}});
    }
    json body{{"command", "lyapunov verify"}, {"Q", st.lc.Q},          {"c", st.lc.c},
              {"M_table", st.M},             {"sandwich", sandwich},   {"growth", growth},
              {"growth_checked", checked},   {"growth_vacuous", vacuous}, {"lower_bound_certificate", true}};
    if (!ok) body["witness"] = witness;
    emit(ctx, "lyapunov_verify.json", body);
    return ok ? kOk : kFalsified;
  } catch (const NotRfcTdiError& e) {
    emit(ctx, "lyapunov_verify.json", {{"command", "lyapunov verify"}, {"falsified", e.what()}});
    return kFalsified;
  }
}

Context make_context(const std::string& path, std::optional<std::uint64_t> seed, int workers,
                     const std::string& out_flag) {
  Context ctx;
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config '" + path + "'");
  try {
    ctx.cfg = json::parse(f);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  validate_config(ctx.cfg);
  if (seed) ctx.cfg["seed"] = *seed;
  if (!ctx.cfg.contains("seed")) throw ConfigError("a seed is required (config 'seed' or --seed)");
  ctx.seed = ctx.cfg["seed"].get<std::uint64_t>();
  ctx.workers = std::max(1, workers);
  if (!out_flag.empty())
    ctx.out = out_flag;
  else if (ctx.cfg.contains("output_dir"))
    ctx.out = ctx.cfg["output_dir"].get<std::string>();
  else if (const char* env = std::getenv("BRSLAB_OUT"))
    ctx.out = env;
  else
    ctx.out = ".";
  json hashed = ctx.cfg;
  hashed.erase("output_dir");
  ctx.hash = io::config_hash(hashed);
  return ctx;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"brslab: bounded-reachability Lyapunov toolkit"};
  app.require_subcommand(1);

  std::string config;
  std::optional<std::uint64_t> seed;
  int workers = 1;
  std::string out;
  std::string mode = "open";

  auto add_common = [&](CLI::App* c) {
    c->add_option("config", config, "experiment config (JSON)")->required();
    c->add_option("--seed", seed, "random seed (overrides config)");
    c->add_option("--workers", workers, "parallel workers")->check(CLI::PositiveNumber);
    c->add_option("--out", out, "output directory");
  };

  auto* sim = app.add_subcommand("simulate", "integrate one trajectory");
  add_common(sim);
  auto* brs = app.add_subcommand("brs", "reachability bounds");
  brs->require_subcommand(1);
  auto* brs_fit = brs->add_subcommand("fit", "fit an additive reach bound");
  add_common(brs_fit);
  auto* rfc = app.add_subcommand("rfc", "robust forward completeness");
  rfc->require_subcommand(1);
  auto* rfc_verify = rfc->add_subcommand("verify", "check the kappa bound on dominated inputs");
  add_common(rfc_verify);
  auto* lip = app.add_subcommand("lipschitz", "Lipschitz probes");
  lip->require_subcommand(1);
  auto* lip_probe = lip->add_subcommand("probe", "estimate flow Lipschitz constants");
  add_common(lip_probe);
  lip_probe->add_option("--mode", mode, "open or tdi")->check(CLI::IsMember({"open", "tdi"}));
  auto* lyap = app.add_subcommand("lyapunov", "Lyapunov construction");
  lyap->require_subcommand(1);
  auto* lyap_build = lyap->add_subcommand("build", "tabulate V and W on a radial grid");
  add_common(lyap_build);
  auto* lyap_verify = lyap->add_subcommand("verify", "sandwich and growth checks");
  add_common(lyap_verify);
  auto* ex = app.add_subcommand("examples", "example registry");
  ex->require_subcommand(1);
  auto* ex_list = ex->add_subcommand("list", "print the registry as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (ex_list->parsed()) {
      std::cout << examples::list().dump(2) << "\n";
      return kOk;
    }
    const Context ctx = make_context(config, seed, workers, out);
    if (sim->parsed()) return cmd_simulate(ctx);
    if (brs_fit->parsed()) return cmd_brs_fit(ctx);
    if (rfc_verify->parsed()) return cmd_rfc_verify(ctx);
    if (lip_probe->parsed()) return cmd_lipschitz_probe(ctx, mode);
    if (lyap_build->parsed()) return cmd_lyapunov_build(ctx);
    if (lyap_verify->parsed()) return cmd_lyapunov_verify(ctx);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
