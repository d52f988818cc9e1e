#include <chrono>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "specctrl/io.hpp"
#include "specctrl/reproduce.hpp"
#include "specctrl/specctrl.hpp"

namespace fs = std::filesystem;
using namespace specctrl;
using io::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string manifest_path(const std::string& out) { return out + ".manifest.json"; }

void write_manifest(const std::string& out, const std::string& subcommand, const json& config,
                    const std::vector<std::string>& inputs, const std::vector<std::string>& outputs) {
  io::write_json(manifest_path(out), io::manifest(subcommand, config, inputs, outputs));
}

/// Gains from either a pole configuration or a file holding K0/G0.
Gains load_gains(const std::string& path, const SpectralModel& m,
                 std::vector<std::string>* warnings) {
  const json j = io::read_json(path);
  if (j.contains("K0")) return io::gains_from_json(j, m);
  const auto cfg = io::poles_config_from_json(j);
  return synthesize_gains(m, cfg.controller_poles, cfg.observer_poles, warnings);
}

void print_warnings(const std::vector<std::string>& w) {
  for (const auto& s : w) std::cerr << "warning: " << s << "\n";
}

SpectralModel load_valid_model(const std::string& path) {
  SpectralModel m = io::model_from_json(io::read_json(path));
  const auto v = validate(m);
  if (!v.empty()) {
    std::string msg = "model " + path + " is invalid:";
    for (const auto& s : v) msg += "\n  " + s;
    throw ModelError(msg);
  }
  return m;
}

// ---------------------------------------------------------------------------

struct BuildArgs {
  std::string plant;
  double delta = 0.5;
  int extra_stable = 0;
  std::optional<int> n_tail;
  std::optional<int> order;
  std::string out;
};

int run_build(const BuildArgs& a) {
  const json pj = io::read_json(a.plant);
  io::PlantSpec spec = io::plant_from_json(pj);
  SpectralModel m;
  if (const auto* toy = std::get_if<io::ToySpec>(&spec.plant)) {
    const Eigen::Index n1 = a.extra_stable > 0 ? a.extra_stable : toy->n1_dim;
    m = build_toy(n1, a.n_tail.value_or(static_cast<int>(toy->n_tail)), a.delta);
  } else {
    const auto& plant = std::get<OdePdePlant>(spec.plant);
    const ApproximatedPlant ap = approximate(plant, a.order.value_or(spec.order));
    std::optional<Eigen::Index> nt;
    if (a.n_tail) nt = *a.n_tail;
    m = to_spectral(ap.A, ap.B, ap.C, a.delta, a.extra_stable, nt);
  }
  const auto v = validate(m);
  if (!v.empty()) {
    for (const auto& s : v) std::cerr << "violation: " << s << "\n";
    return kExitFailure;
  }
  io::write_json(a.out, io::to_json(m));
  write_manifest(a.out, "build",
                 {{"plant", a.plant}, {"delta", a.delta}, {"extra_stable", a.extra_stable},
                  {"n_tail", a.n_tail ? json(*a.n_tail) : json(nullptr)},
                  {"order", a.order ? json(*a.order) : json(nullptr)}},
                 {a.plant}, {a.out});
  std::cout << "model: n0=" << m.n0() << " n1_dim=" << m.n1_dim() << " n_tail=" << m.n_tail()
            << " -> " << a.out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string model;
  std::string gains;
  std::string out_certificate;
  std::string out_controller;
  std::string out_gains;
  std::string knowledge;  // optional knowledge model for the uncertain path
  bool realify_ctrl = false;
};

int run_synthesize(const SynthArgs& a) {
  const SpectralModel truth = load_valid_model(a.model);
  const SpectralModel design_model = a.knowledge.empty() ? truth : load_valid_model(a.knowledge);
  std::vector<std::string> warnings;
  const Gains g = load_gains(a.gains, design_model, &warnings);
  print_warnings(warnings);
  const LyapunovPair lp = solve_lyapunov_pair(design_model, g);
  Certificate cert;
  if (a.knowledge.empty()) {
    cert = certify_exact(truth, g, lp.P0, lp.P1);
  } else {
    UncertaintySpec u{truth.A0 - design_model.A0, truth.A1 - design_model.A1,
                      truth.B0 - design_model.B0, truth.B1 - design_model.B1,
                      truth.C0 - design_model.C0, truth.C1 - design_model.C1};
    cert = certify_uncertain(design_model, u, g, lp.P0, lp.P1);
  }
  ControllerRealization ctrl = assemble_controller(design_model, g);
  if (a.realify_ctrl) ctrl = realify(ctrl);
  std::vector<std::string> inputs{a.model, a.gains};
  if (!a.knowledge.empty()) inputs.push_back(a.knowledge);
  std::vector<std::string> outputs;
  if (!a.out_certificate.empty()) {
    io::write_json(a.out_certificate, io::to_json(cert));
    outputs.push_back(a.out_certificate);
  }
  if (!a.out_controller.empty()) {
    io::write_json(a.out_controller, io::to_json(ctrl, g));
    outputs.push_back(a.out_controller);
  }
  if (!a.out_gains.empty()) {
    io::write_json(a.out_gains, io::to_json(g));
    outputs.push_back(a.out_gains);
  }
  if (!outputs.empty()) {
    write_manifest(outputs.front(), "synthesize",
                   {{"model", a.model}, {"gains", a.gains}, {"knowledge", a.knowledge},
                    {"realify", a.realify_ctrl}},
                   inputs, outputs);
  }
  std::cout << io::to_json(cert).dump(2) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct CertifyArgs {
  std::string model;
  std::string gains;
  std::string out;
};

int run_certify(const CertifyArgs& a) {
  const SpectralModel m = load_valid_model(a.model);
  std::vector<std::string> warnings;
  const Gains g = load_gains(a.gains, m, &warnings);
  print_warnings(warnings);
  const LyapunovPair lp = solve_lyapunov_pair(m, g);
  const Certificate c = certify_exact(m, g, lp.P0, lp.P1);
  const json j = io::to_json(c);
  if (!a.out.empty()) {
    io::write_json(a.out, j);
    write_manifest(a.out, "certify", {{"model", a.model}, {"gains", a.gains}}, {a.model, a.gains}, {a.out});
  }
  std::cout << j.dump(2) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string model;
  std::string controller;
  double t_end = 20.0;
  double dt = 1e-2;
  std::string out;
  bool open_loop = false;
};

int run_simulate(const SimulateArgs& a) {
  const SpectralModel m = load_valid_model(a.model);
  Gains g = zero_gains(m);
  std::optional<LyapunovWeights> w;
  std::vector<std::string> inputs{a.model};
  if (!a.open_loop) {
    if (a.controller.empty()) throw UsageError("simulate: --controller is required unless --open-loop");
    const json cj = io::read_json(a.controller);
    if (!cj.contains("gains")) throw ModelError("controller file has no gains section");
    g = io::gains_from_json(cj.at("gains"), m);
    inputs.push_back(a.controller);
    try {
      const LyapunovPair lp = solve_lyapunov_pair(m, g);
      const Certificate c = certify_exact(m, g, lp.P0, lp.P1);
      w = LyapunovWeights::from(c, lp.P0, lp.P1);
      if (!c.satisfied) std::cerr << "note: design is not certified (rho = " << c.rho << ")\n";
    } catch (const Error& e) {
      std::cerr << "note: no Lyapunov weights (" << e.what() << "); V column is NaN\n";
    }
  }
  const ClosedLoopSystem sys = assemble(m, g);
  const Trajectory t = propagate(sys, default_initial_state(sys.layout), a.t_end, a.dt, w);
  const DecayFit fit = fit_decay(t);
  io::write_text(a.out, io::trajectory_csv(t));
  write_manifest(a.out, "simulate",
                 {{"model", a.model}, {"controller", a.controller}, {"t_end", a.t_end}, {"dt", a.dt},
                  {"open_loop", a.open_loop}},
                 inputs, {a.out});
  std::cout << "fitted_rate " << io::format_double(fit.rate) << "\novershoot "
            << io::format_double(fit.overshoot) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct SweepArgs {
  std::string model;
  std::string gains;
  double magnitude = 0.1;
  int trials = 50;
  std::uint64_t seed = 0;
  double t_end = 20.0;
  double dt = 1e-2;
  int threads = 0;
  std::string out;
  std::string trajectories_dir;
};

int run_sweep(const SweepArgs& a) {
  const SpectralModel m = load_valid_model(a.model);
  const auto poles = io::poles_config_from_json(io::read_json(a.gains));
  SweepSettings cfg;
  cfg.magnitude = a.magnitude;
  cfg.trials = a.trials;
  cfg.seed = a.seed;
  cfg.t_end = a.t_end;
  cfg.dt = a.dt;
  cfg.threads = a.threads;
  cfg.keep_trajectories = !a.trajectories_dir.empty();
  const auto trials = uncertainty_sweep(m, poles.controller_poles, poles.observer_poles, cfg);
  io::write_text(a.out, io::sweep_csv(trials));
  std::vector<std::string> outputs{a.out};
  if (!a.trajectories_dir.empty()) {
    fs::create_directories(a.trajectories_dir);
    for (const auto& t : trials) {
      const std::string p = (fs::path(a.trajectories_dir) / ("trial_" + std::to_string(t.index) + ".csv")).string();
      io::write_text(p, io::trajectory_csv(t.trajectory));
      outputs.push_back(p);
    }
  }
  for (const auto& t : trials) {
    if (!t.error.empty()) std::cerr << "trial " << t.index << ": " << t.error << "\n";
  }
  write_manifest(a.out, "sweep",
                 {{"model", a.model}, {"gains", a.gains}, {"magnitude", a.magnitude},
                  {"trials", a.trials}, {"seed", a.seed}, {"t_end", a.t_end}, {"dt", a.dt}},
                 {a.model, a.gains}, outputs);
  std::cout << "fraction_stable " << io::format_double(fraction_stable(trials)) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

int run_reproduce(const std::string& target, const std::string& out_dir) {
  std::vector<std::string> targets;
  if (target == "all") {
    for (const char* t : reproduce::kTargets) targets.emplace_back(t);
  } else {
    targets.push_back(target);
  }
  fs::create_directories(out_dir);
  bool ok = true;
  for (const auto& t : targets) {
    const auto start = std::chrono::steady_clock::now();
    const reproduce::Output r = reproduce::run(t);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::vector<std::string> outputs;
    for (const auto& [name, content] : r.files) {
      const std::string p = (fs::path(out_dir) / name).string();
      io::write_text(p, content);
      outputs.push_back(p);
    }
    json checks = json::array();
    for (const auto& c : r.checks) {
      const char* tag = c.counted ? (c.pass ? "PASS" : "FAIL") : (c.pass ? "info-pass" : "info-fail");
      std::cout << "[" << tag << "] " << c.name << ": " << c.detail << "\n";
      checks.push_back({{"name", c.name}, {"pass", c.pass}, {"counted", c.counted}, {"detail", c.detail}});
    }
    std::cout << t << ": " << (r.passed() ? "all thresholds met" : "threshold failure") << " ("
              << reproduce::num(secs, 3) << " s)\n";
    const std::string report = (fs::path(out_dir) / (t + "_report.json")).string();
    io::write_json(report, {{"target", t}, {"passed", r.passed()}, {"checks", checks}});
    outputs.push_back(report);
    write_manifest((fs::path(out_dir) / t).string(), "reproduce", {{"target", t}}, {}, outputs);
    ok = ok && r.passed();
  }
  return ok ? kExitOk : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral reduced-order controller synthesis and certification"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(io::kVersion));

  BuildArgs build;
  auto* b = app.add_subcommand("build", "Build a spectral model from a plant description");
  b->add_option("--plant", build.plant, "Plant JSON")->required()->check(CLI::ExistingFile);
  b->add_option("--delta", build.delta, "Target decay rate")->check(CLI::PositiveNumber);
  b->add_option("--extra-stable", build.extra_stable, "Retained stable modes (n1_dim)")->check(CLI::NonNegativeNumber);
  b->add_option("--n-tail", build.n_tail, "Tail length");
  b->add_option("--order", build.order, "Rational approximation order for PDE plants");
  b->add_option("--out", build.out, "Output model JSON")->required();

  SynthArgs synth;
  auto* s = app.add_subcommand("synthesize", "Synthesize gains, certificate and controller");
  s->add_option("--model", synth.model, "Model JSON")->required()->check(CLI::ExistingFile);
  s->add_option("--gains", synth.gains, "Pole configuration or gains JSON")->required()->check(CLI::ExistingFile);
  s->add_option("--knowledge", synth.knowledge, "Knowledge model the controller is built on")->check(CLI::ExistingFile);
  s->add_option("--out-certificate", synth.out_certificate, "Certificate JSON");
  s->add_option("--out-controller", synth.out_controller, "Controller JSON");
  s->add_option("--out-gains", synth.out_gains, "Gains JSON");
  s->add_flag("--realify", synth.realify_ctrl, "Write the controller in real block form");

  CertifyArgs cert;
  auto* c = app.add_subcommand("certify", "Evaluate the exact-model certificate");
  c->add_option("--model", cert.model, "Model JSON")->required()->check(CLI::ExistingFile);
  c->add_option("--gains", cert.gains, "Pole configuration or gains JSON")->required()->check(CLI::ExistingFile);
  c->add_option("--out", cert.out, "Certificate JSON");

  SimulateArgs sim;
  auto* m = app.add_subcommand("simulate", "Simulate the closed (or open) loop");
  m->add_option("--model", sim.model, "Model JSON")->required()->check(CLI::ExistingFile);
  m->add_option("--controller", sim.controller, "Controller JSON")->check(CLI::ExistingFile);
  m->add_option("--t-end", sim.t_end, "Final time")->check(CLI::PositiveNumber);
  m->add_option("--dt", sim.dt, "Time step")->check(CLI::PositiveNumber);
  m->add_option("--out", sim.out, "Trajectory CSV")->required();
  m->add_flag("--open-loop", sim.open_loop, "Simulate without control");

  SweepArgs sweep;
  auto* w = app.add_subcommand("sweep", "Randomized model-uncertainty sweep");
  w->add_option("--model", sweep.model, "Model JSON")->required()->check(CLI::ExistingFile);
  w->add_option("--gains", sweep.gains, "Pole configuration JSON")->required()->check(CLI::ExistingFile);
  w->add_option("--magnitude", sweep.magnitude, "Entrywise perturbation bound")->check(CLI::NonNegativeNumber);
  w->add_option("--trials", sweep.trials, "Number of trials")->check(CLI::PositiveNumber);
  w->add_option("--seed", sweep.seed, "RNG seed");
  w->add_option("--t-end", sweep.t_end, "Final time")->check(CLI::PositiveNumber);
  w->add_option("--dt", sweep.dt, "Time step")->check(CLI::PositiveNumber);
  w->add_option("--threads", sweep.threads, "Worker threads (default: SPECCTRL_THREADS or all cores)");
  w->add_option("--out", sweep.out, "Summary CSV")->required();
  w->add_option("--trajectories", sweep.trajectories_dir, "Directory for per-trial trajectories");

  std::string target;
  std::string out_dir = "reproduce_out";
  auto* r = app.add_subcommand("reproduce", "Run a built-in study and compare against thresholds");
  r->add_option("target", target, "fig1, fig2, fig3, fig4, table_5_2, table_5_3 or all")
      ->required()
      ->check(CLI::IsMember({"fig1", "fig2", "fig3", "fig4", "table_5_2", "table_5_3", "all"}));
  r->add_option("--out-dir", out_dir, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (b->parsed()) return run_build(build);
    if (s->parsed()) return run_synthesize(synth);
    if (c->parsed()) return run_certify(cert);
    if (m->parsed()) return run_simulate(sim);
    if (w->parsed()) return run_sweep(sweep);
    if (r->parsed()) return run_reproduce(target, out_dir);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const specctrl::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: malformed input: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}
