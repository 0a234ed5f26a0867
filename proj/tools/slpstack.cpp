// Command-line front end: replicated experiments plus the enumerate / infer /
// weights / eval pipeline over serialized intermediates.

#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "slpstack/slpstack.hpp"

namespace fs = std::filesystem;
using namespace slpstack;

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<double> parse_beta_list(const std::string& s) {
  std::vector<double> out;
  for (const auto& item : split_list(s)) out.push_back(parse_real(item));
  return out;
}

struct BudgetFlags {
  std::size_t steps = 1000, burn = 400, is_n = 5000;
  std::string proposal = "moment";
  std::string kernel = "single-site";

  void add(CLI::App* cmd) {
    cmd->add_option("--steps", steps, "MH samples kept per SLP")->capture_default_str();
    cmd->add_option("--burn", burn, "MH burn-in steps per SLP")->capture_default_str();
    cmd->add_option("--is-n", is_n, "importance samples per SLP for log Z")->capture_default_str();
    cmd->add_option("--proposal", proposal, "IS proposal")
        ->check(CLI::IsMember({"moment", "prior"}))
        ->capture_default_str();
    cmd->add_option("--kernel", kernel, "MH kernel")
        ->check(CLI::IsMember({"single-site", "joint"}))
        ->capture_default_str();
  }

  BudgetConfig budget(std::uint64_t seed) const {
    BudgetConfig b;
    b.mcmc_steps_per_slp = steps;
    b.burn_in = burn;
    b.is_proposals_per_slp = is_n;
    b.seed = seed;
    b.proposal = proposal == "prior" ? IsProposalKind::Prior : IsProposalKind::MomentMatched;
    b.kernel = kernel == "joint" ? MhKernel::Joint : MhKernel::SingleSite;
    return b;
  }
};

void print_summary(const ExperimentReport& report) {
  std::cout << report.config.experiment << ": " << report.datasets.size() << " datasets, " << report.num_slps()
            << " SLPs\n";
  std::size_t failed = 0;
  for (const auto& d : report.datasets) failed += d.failed;
  if (failed) std::cout << failed << " datasets failed\n";
  std::cout << summary_csv(summarize(report));
}

// Layout of an `infer` output directory.
fs::path slp_file(const fs::path& dir, std::size_t k) { return dir / ("slp_" + std::to_string(k) + ".jsonl"); }

struct InferDir {
  Json estimates;
  std::vector<SlpEstimate> slps;  // samples loaded from disk
  std::size_t n_val = 0, n_test = 0;
};

InferDir load_infer_dir(const fs::path& dir) {
  InferDir d;
  d.estimates = read_json_file((dir / "estimates.json").string());
  d.n_val = d.estimates.at("n_val").get<std::size_t>();
  d.n_test = d.estimates.at("n_test").get<std::size_t>();
  for (const auto& s : d.estimates.at("slps")) {
    SlpEstimate e;
    e.slp_id = s.at("id").get<std::size_t>();
    e.path = AddressPath::from_strings(s.at("path").get<std::vector<std::string>>());
    e.log_Z = real_from_json(s.at("log_Z"));
    e.log_Z_se = real_from_json(s.at("se"));
    e.failed = s.at("failed").get<bool>();
    if (!e.failed) e.samples = read_samples_ndjson(slp_file(dir, e.slp_id).string());
    d.slps.push_back(std::move(e));
  }
  return d;
}

int cmd_experiment(const ExperimentConfig& cfg, const std::string& out) {
  const ExperimentReport report = run_experiment(cfg);
  if (cfg.experiment == "pcfg-enum" || cfg.experiment == "pcfg") {
    std::cout << report.slp_paths.size() << " SLPs" << (report.truncated ? " (truncated)" : "") << '\n';
  } else {
    print_summary(report);
  }
  if (!out.empty()) report_emit(report, out);
  return 0;
}

int cmd_enumerate(const std::string& name, std::size_t max_slps, std::uint64_t seed, std::size_t n_train) {
  const ModelSpec spec = builtin_model(name);
  const Dataset data = spec.generate(n_train, derive_seed(seed, "train", 0));
  const Enumeration en = enumerate_slps(spec.program(data, data), max_slps, seed);
  Json paths = Json::array();
  for (const auto& p : en.paths) paths.push_back(p.to_strings());
  std::cout << Json{{"program", spec.name}, {"truncated", en.truncated}, {"n", en.paths.size()}, {"paths", paths}}.dump(2)
            << '\n';
  return 0;
}

int cmd_infer(const std::string& name, std::size_t max_slps, const BudgetConfig& budget, std::size_t n_train,
              std::size_t n_val, std::size_t n_test, unsigned threads, const fs::path& out) {
  const ModelSpec spec = builtin_model(name);
  if (spec.name == "pcfg-enum") throw Error(ErrorCode::InvalidArgument, "the grammar program is enumeration-only");
  const std::uint64_t seed = budget.seed;
  const Dataset train = spec.generate(n_train, derive_seed(seed, "train", 0));
  const Dataset val = spec.generate(n_val, derive_seed(seed, "val", 0));
  const Dataset test = spec.generate(n_test, derive_seed(seed, "test", 0));
  BudgetConfig b = budget;
  b.threads = threads;
  const DccResult dcc = dcc_run(spec.program(train, Dataset::concat(val, test)), max_slps, b);

  fs::create_directories(out);
  Json slps = Json::array();
  for (const auto& e : dcc.slps) {
    if (!e.failed) write_samples_ndjson(slp_file(out, e.slp_id).string(), e.samples);
    slps.push_back({{"id", e.slp_id},
                    {"path", e.path.to_strings()},
                    {"log_Z", real_to_json(e.log_Z)},
                    {"se", real_to_json(e.log_Z_se)},
                    {"ess", real_to_json(e.ess)},
                    {"acceptance", real_to_json(e.acceptance_rate)},
                    {"n_samples", e.samples.size()},
                    {"failed", e.failed},
                    {"failure", e.failure},
                    {"diagnostics", e.diagnostics}});
  }
  Json est{{"program", spec.name},  {"seed", seed},    {"n_train", n_train}, {"n_val", n_val},
           {"n_test", n_test},      {"slps", slps},    {"truncated", dcc.truncated},
           {"warnings", dcc.warnings}};
  if (spec.analytic_log_Z) est["analytic_log_Z"] = reals_to_json(spec.analytic_log_Z(train));
  write_json_file((out / "estimates.json").string(), est);
  std::cout << "wrote " << dcc.slps.size() << " SLPs to " << out.string() << '\n';
  return 0;
}

int cmd_weights(const std::string& method, double beta, const fs::path& in, const std::string& out) {
  const InferDir d = load_infer_dir(in);
  const PredictiveMatrix all = predictive_matrix(d.slps);
  const auto n_val = static_cast<Eigen::Index>(d.n_val);
  const PredictiveMatrix val = all.columns(0, n_val);
  const std::size_t kk = d.slps.size();
  Json diagnostics = Json::object();
  OptimizedWeights ow;
  if (method == "bma") {
    std::vector<double> log_z;
    for (const auto& e : d.slps) log_z.push_back(e.log_Z);
    ow.w = bma_weights(log_z);
  } else if (method == "equal") {
    std::vector<bool> mask(kk);
    for (std::size_t k = 0; k < kk; ++k) mask[k] = !d.slps[k].samples.empty();
    ow.w = equal_weights(kk, mask);
  } else if (method == "stack" || method == "stack-val") {
    if (n_val == 0) throw Error(ErrorCode::InvalidArgument, "stacking on a validation set needs --val > 0 at infer time");
    ow = optimize_stacking(val);
  } else {
    const LooMatrix loo = psis_loo_matrix(d.slps);
    diagnostics["n_bad_khat"] = loo.n_bad_khat;
    diagnostics["loo"] = loo_to_json(loo);
    ow = method == "pac" ? optimize_pac(loo.as_predictive(), PacConfig{beta, std::nullopt}) : loo_stacking_weights(loo);
  }
  if (ow.objective == kNegInf && n_val > 0 && (method == "bma" || method == "equal"))
    ow.objective = stacking_objective(ow.w, val);
  diagnostics["gap"] = real_to_json(ow.gap);
  diagnostics["messages"] = ow.diagnostics;
  Json j{{"method", method},
         {"w", reals_to_json(ow.w.values())},
         {"objective", real_to_json(ow.objective)},
         {"diagnostics", diagnostics}};
  if (method == "pac") j["beta"] = real_to_json(beta);
  if (out.empty())
    std::cout << j.dump(2) << '\n';
  else
    write_json_file(out, j);
  return 0;
}

int cmd_eval(const fs::path& in, const std::string& weights_file) {
  const InferDir d = load_infer_dir(in);
  const PredictiveMatrix all = predictive_matrix(d.slps);
  const PredictiveMatrix test = all.columns(static_cast<Eigen::Index>(d.n_val), static_cast<Eigen::Index>(d.n_test));
  const Json wj = read_json_file(weights_file);
  const WeightVector w(reals_from_json(wj.at("w")));
  std::cout << Json{{"method", wj.value("method", "")}, {"lppd", real_to_json(lppd(test, w))}, {"n_test", d.n_test}}.dump(2)
            << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stacking and model averaging over the straight-line programs of a probabilistic program"};
  app.set_config("--config", "", "TOML/INI file mirroring the flags; flags win on conflict");
  app.require_subcommand(1);

  // experiment
  ExperimentConfig ecfg;
  std::string methods = "bma,bma-analytic,equal,stack-val,stack-loo,pac";
  std::string betas = "0.001,0.1,1,10,inf";
  std::string exp_out;
  BudgetFlags exp_budget;
  auto* exp = app.add_subcommand("experiment", "replicate an experiment over regenerated datasets");
  exp->add_option("--name", ecfg.experiment, "experiment")
      ->check(CLI::IsMember(builtin_model_names()))
      ->capture_default_str();
  exp->add_option("--datasets", ecfg.n_datasets, "number of replicated datasets")->capture_default_str();
  exp->add_option("--train", ecfg.n_train, "training points per dataset")->capture_default_str();
  exp->add_option("--test", ecfg.n_test, "held-out test points per dataset")->capture_default_str();
  exp->add_option("--methods", methods, "comma-separated weighting methods")->capture_default_str();
  exp->add_option("--beta", betas, "comma-separated PAC beta grid ('inf' allowed)")->capture_default_str();
  exp->add_option("--seed", ecfg.seed, "master seed")->capture_default_str();
  exp->add_option("--max-slps", ecfg.max_slps, "enumeration limit")->capture_default_str();
  exp->add_option("--threads", ecfg.threads, "worker threads across datasets")->capture_default_str();
  exp->add_option("--out", exp_out, "output directory for CSV/JSON reports");
  exp_budget.add(exp);

  // enumerate
  std::string enum_program = "distinct";
  std::size_t enum_max = 128, enum_train = 20;
  std::uint64_t enum_seed = 0;
  auto* en = app.add_subcommand("enumerate", "list the SLPs of a built-in program (breadth-first)");
  en->add_option("--program", enum_program, "program")->check(CLI::IsMember(builtin_model_names()))->capture_default_str();
  en->add_option("--max-slps", enum_max, "enumeration limit")->capture_default_str();
  en->add_option("--seed", enum_seed, "seed")->capture_default_str();
  en->add_option("--train", enum_train, "data points generated for the program")->capture_default_str();

  // infer
  std::string inf_program = "distinct", inf_out;
  std::size_t inf_max = 128, inf_train = 200, inf_val = 0, inf_test = 1000;
  std::uint64_t inf_seed = 0;
  unsigned inf_threads = 1;
  BudgetFlags inf_budget;
  auto* inf = app.add_subcommand("infer", "run per-SLP inference and dump samples");
  inf->add_option("--program", inf_program, "program")->check(CLI::IsMember(builtin_model_names()))->capture_default_str();
  inf->add_option("--max-slps", inf_max, "enumeration limit")->capture_default_str();
  inf->add_option("--seed", inf_seed, "seed for data and inference")->capture_default_str();
  inf->add_option("--train", inf_train, "training points")->capture_default_str();
  inf->add_option("--val", inf_val, "validation points (return vector prefix)")->capture_default_str();
  inf->add_option("--test", inf_test, "test points (return vector suffix)")->capture_default_str();
  inf->add_option("--threads", inf_threads, "worker threads across SLPs")->capture_default_str();
  inf->add_option("--out", inf_out, "output directory")->required();
  inf_budget.add(inf);

  // weights
  std::string w_method = "psis-loo", w_in, w_out;
  double w_beta = kInf;
  auto* wt = app.add_subcommand("weights", "compute SLP weights from an infer directory");
  wt->add_option("--method", w_method, "weighting method")
      ->check(CLI::IsMember({"bma", "equal", "stack", "stack-val", "pac", "psis-loo"}))
      ->capture_default_str();
  wt->add_option_function<std::string>("--beta", [&](const std::string& s) { w_beta = parse_real(s); },
                                       "PAC regularization strength ('inf' allowed)");
  wt->add_option("--in", w_in, "infer output directory")->required();
  wt->add_option("--out", w_out, "weights.json path (stdout when omitted)");

  // eval
  std::string ev_in, ev_weights;
  auto* ev = app.add_subcommand("eval", "held-out LPPD of a weighting");
  ev->add_option("--in", ev_in, "infer output directory")->required();
  ev->add_option("--weights", ev_weights, "weights.json")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*exp) {
      ecfg.methods = split_list(methods);
      ecfg.beta_grid = parse_beta_list(betas);
      ecfg.budget = exp_budget.budget(ecfg.seed);
      return cmd_experiment(ecfg, exp_out);
    }
    if (*en) return cmd_enumerate(enum_program, enum_max, enum_seed, enum_train);
    if (*inf)
      return cmd_infer(inf_program, inf_max, inf_budget.budget(inf_seed), inf_train, inf_val, inf_test, inf_threads,
                       inf_out);
    if (*wt) return cmd_weights(w_method, w_beta, w_in, w_out);
    if (*ev) return cmd_eval(ev_in, ev_weights);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
