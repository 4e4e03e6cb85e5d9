// Command-line front end: simulate, fit, classify, ped, summary.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "longmix/chain_io.hpp"
#include "longmix/data.hpp"
#include "longmix/errors.hpp"
#include "longmix/linalg.hpp"
#include "longmix/model_config.hpp"
#include "longmix/ped.hpp"
#include "longmix/postprocess.hpp"
#include "longmix/prior.hpp"
#include "longmix/sampler.hpp"
#include "longmix/simulate.hpp"
#include "longmix/threading.hpp"
#include "longmix/version.hpp"

namespace {

using nlohmann::json;

void emit_error(const std::string& type, const std::string& message) {
  json err{{"error", {{"type", type}, {"message", message}}}};
  std::cerr << err.dump() << std::endl;
}

std::string format_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

longmix::ValidatedDataset load_dataset(const std::string& data_path,
                                       const std::string& attrs_path,
                                       const longmix::ModelConfig& model) {
  longmix::Dataset raw = longmix::read_long_csv(data_path, model.markers);
  if (!attrs_path.empty()) longmix::read_attributes_csv(attrs_path, &raw);
  return longmix::ValidatedDataset::validate(std::move(raw));
}

void check_subjects_match(const longmix::ValidatedDataset& data,
                          const std::vector<std::string>& expected) {
  if (data.n_subjects() != static_cast<int>(expected.size())) {
    throw longmix::ValidationError(
        "data has " + std::to_string(data.n_subjects()) +
        " subjects but the fit was run on " +
        std::to_string(expected.size()));
  }
  for (int i = 0; i < data.n_subjects(); ++i) {
    if (data.subject_id(i) != expected[i]) {
      throw longmix::ValidationError(
          "subject order differs from the fitted data (position " +
          std::to_string(i + 1) + ": '" + data.subject_id(i) + "' vs '" +
          expected[i] + "')");
    }
  }
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream f(path);
  if (!f) throw longmix::ValidationError("cannot write '" + path + "'");
  f << j.dump(2) << '\n';
}

// Design value of a covariate on a plotting grid: subject attributes have no
// grid value and enter at their baseline of zero.
double grid_value(const longmix::Covariate& c, double t) {
  using Kind = longmix::Covariate::Kind;
  switch (c.kind) {
    case Kind::intercept: return 1.0;
    case Kind::time: return t;
    case Kind::time_power: return std::pow(t, c.power);
    case Kind::attribute: return 0.0;
  }
  return 0.0;
}

// E[Y | u = k] at one grid point when the linear predictor is N(m, v):
// identity is linear, log has the log-normal mean, logit needs quadrature.
double marginal_mean(longmix::Family family, double m, double v) {
  switch (family) {
    case longmix::Family::gaussian: return m;
    case longmix::Family::poisson: return std::exp(m + 0.5 * v);
    case longmix::Family::bernoulli: break;
  }
  if (v <= 0.0) return 1.0 / (1.0 + std::exp(-m));
  double sd = std::sqrt(v);
  const int n = 400;  // Simpson over +-10 sd
  double lo = m - 10.0 * sd, h = 20.0 * sd / n;
  double acc = 0.0;
  for (int j = 0; j <= n; ++j) {
    double s = lo + j * h;
    double zst = (s - m) / sd;
    double f = std::exp(-0.5 * zst * zst) / (sd * std::sqrt(2.0 * M_PI)) /
               (1.0 + std::exp(-s));
    acc += f * ((j == 0 || j == n) ? 1.0 : (j % 2 ? 4.0 : 2.0));
  }
  return acc * h / 3.0;
}

std::pair<int, int> parse_k_range(const std::string& text) {
  std::size_t dots = text.find("..");
  int lo = 0, hi = 0;
  try {
    if (dots == std::string::npos) {
      lo = hi = std::stoi(text);
    } else {
      lo = std::stoi(text.substr(0, dots));
      hi = std::stoi(text.substr(dots + 2));
    }
  } catch (const std::exception&) {
    throw longmix::ValidationError("--K-range expects A..B, got '" + text +
                                   "'");
  }
  if (lo < 1 || hi < lo) {
    throw longmix::ValidationError("--K-range expects 1 <= A <= B, got '" +
                                   text + "'");
  }
  return {lo, hi};
}

struct MargLikCli {
  std::string method = "laplace";
  int mc_draws = 4096;
  std::uint64_t seed = 0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--marglik", method,
                    "marginal likelihood method: closed_form, laplace, mc")
        ->check(CLI::IsMember({"closed_form", "laplace", "mc"}));
    cmd->add_option("--mc-draws", mc_draws,
                    "Monte Carlo draws for --marglik mc")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--marglik-seed", seed,
                    "random seed for Monte Carlo marginal likelihoods");
  }
  longmix::MargLikOptions options() const {
    longmix::MargLikOptions o;
    o.method = longmix::marglik_method_from_string(method);
    o.mc_draws = mc_draws;
    o.seed = seed;
    return o;
  }
};

int run(int argc, char** argv) {
  CLI::App app{
      "Model-based clustering of subjects from irregular longitudinal "
      "measurements of mixed-type markers"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(longmix::kVersion));

  int threads = 0;
  app.add_option("--threads", threads,
                 "worker threads (default: LONGMIX_THREADS or all cores)");

  // ---- simulate ----
  auto* sim = app.add_subcommand("simulate", "generate a synthetic dataset");
  std::string sim_preset_name = "k2-normal";
  std::string sim_out;
  int sim_subjects = 200;
  std::vector<int> sim_sizes;
  std::uint64_t sim_seed = 1;
  bool sim_share_times = false;
  sim->add_option("--preset,--setting", sim_preset_name, "scenario name")
      ->check(CLI::IsMember(longmix::sim_preset_names()));
  sim->add_option("--out", sim_out, "output directory")->required();
  auto* sim_subj_opt =
      sim->add_option("--subjects", sim_subjects, "total number of subjects")
          ->check(CLI::PositiveNumber);
  sim->add_option("--sizes", sim_sizes,
                  "subjects per cluster, e.g. 120,80 (overrides --subjects)")
      ->delimiter(',')
      ->excludes(sim_subj_opt);
  sim->add_option("--seed", sim_seed, "random seed");
  sim->add_flag("--share-times", sim_share_times,
                "use one visit schedule for all markers");

  // ---- fit ----
  auto* fit = app.add_subcommand("fit", "run the MCMC sampler");
  std::string fit_data, fit_attrs, fit_model, fit_out;
  int fit_k = 2;
  longmix::McmcConfig mcmc;
  bool fit_no_adapt = false, fit_no_relabel = false, fit_prior_only = false;
  fit->add_option("--data", fit_data, "long-format CSV")->required();
  fit->add_option("--attrs", fit_attrs, "subject attribute CSV");
  fit->add_option("--model", fit_model, "model configuration JSON")
      ->required();
  fit->add_option("--out", fit_out, "output directory")->required();
  fit->add_option("--components,--K", fit_k, "number of mixture components")
      ->required()
      ->check(CLI::PositiveNumber);
  fit->add_option("--keep", mcmc.keep, "stored draws")
      ->check(CLI::PositiveNumber);
  fit->add_option("--thin", mcmc.thin, "sweeps per stored draw")
      ->check(CLI::PositiveNumber);
  fit->add_option("--burnin", mcmc.burnin, "discarded stored-scale iterations")
      ->check(CLI::NonNegativeNumber);
  fit->add_option("--seed", mcmc.seed, "random seed");
  fit->add_flag("--no-adapt", fit_no_adapt, "freeze proposal scales");
  fit->add_flag("--no-relabel", fit_no_relabel,
                "skip the label-switching correction");
  fit->add_flag("--prior-only", fit_prior_only,
                "sample from the prior (diagnostic)");

  // ---- classify ----
  auto* cls = app.add_subcommand("classify", "posterior classification");
  std::string cls_fit, cls_data, cls_attrs, cls_out;
  std::string cls_backend = "marginal";
  double cls_level = 0.95, cls_threshold = 0.5;
  bool cls_defer = false;
  MargLikCli cls_ml;
  cls->add_option("--fit", cls_fit, "fit directory")->required();
  cls->add_option("--data", cls_data,
                  "long-format CSV (default: the path recorded in the fit)");
  cls->add_option("--attrs", cls_attrs, "subject attribute CSV");
  cls->add_option("--out", cls_out,
                  "output CSV (default: classification.csv in the fit "
                  "directory)");
  cls->add_option("--backend", cls_backend,
                  "probability backend: marginal or augmented")
      ->check(CLI::IsMember({"marginal", "augmented"}));
  cls->add_option("--level", cls_level, "HPD level")
      ->check(CLI::Range(0.0, 1.0));
  cls->add_option("--threshold", cls_threshold,
                  "HPD lower bound needed to assign");
  cls->add_flag("--defer", cls_defer,
                "leave subjects unassigned unless the HPD lower bound "
                "exceeds the threshold");
  cls_ml.attach(cls);

  // ---- ped ----
  auto* ped = app.add_subcommand(
      "ped", "penalized expected deviance across candidate models");
  std::string ped_data, ped_attrs, ped_out, ped_model, ped_krange;
  std::vector<std::string> ped_pairs;
  longmix::McmcConfig ped_mcmc;
  MargLikCli ped_ml;
  ped->add_option("--data", ped_data, "long-format CSV")->required();
  ped->add_option("--attrs", ped_attrs, "subject attribute CSV");
  auto* ped_pair_opt =
      ped->add_option("--pair", ped_pairs,
                      "two fit directories of the same model, DIR_A:DIR_B "
                      "(repeat per candidate K)");
  ped->add_option("--model", ped_model,
                  "model configuration JSON (with --K-range)");
  ped->add_option("--K-range", ped_krange,
                  "candidate component counts A..B; runs two chains per K")
      ->excludes(ped_pair_opt);
  ped->add_option("--out", ped_out, "output directory")->required();
  ped->add_option("--keep", ped_mcmc.keep, "stored draws per chain")
      ->check(CLI::PositiveNumber);
  ped->add_option("--thin", ped_mcmc.thin, "sweeps per stored draw")
      ->check(CLI::PositiveNumber);
  ped->add_option("--burnin", ped_mcmc.burnin,
                  "discarded stored-scale iterations")
      ->check(CLI::NonNegativeNumber);
  ped->add_option("--seed", ped_mcmc.seed, "random seed");
  ped_ml.attach(ped);

  // ---- summary ----
  auto* smry = app.add_subcommand("summary", "posterior parameter summaries");
  std::string smry_fit, smry_out, smry_curves, smry_grid = "0:30:61";
  double smry_level = 0.95;
  smry->add_option("--fit", smry_fit, "fit directory")->required();
  smry->add_option("--out", smry_out,
                   "output JSON (default: summary.json in the fit "
                   "directory)");
  smry->add_option("--curves", smry_curves,
                   "cluster mean-curve CSV (default: curves.csv in the fit "
                   "directory)");
  smry->add_option("--grid", smry_grid,
                   "time grid LO:HI:POINTS for the mean curves");
  smry->add_option("--level", smry_level, "HPD level")
      ->check(CLI::Range(0.0, 1.0));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    emit_error("validation", e.what());
    return 2;
  }
  if (threads > 0) longmix::set_max_threads(threads);

  if (*sim) {
    longmix::SimSetting setting =
        longmix::sim_preset(sim_preset_name, sim_subjects, sim_seed);
    if (!sim_sizes.empty()) {
      if (sim_sizes.size() != setting.counts.size()) {
        throw longmix::ValidationError(
            "--sizes needs " + std::to_string(setting.counts.size()) +
            " entries for " + sim_preset_name);
      }
      for (int c : sim_sizes) {
        if (c < 1) {
          throw longmix::ValidationError(
              "--sizes entries must be positive");
        }
      }
      setting.counts = sim_sizes;
    }
    setting.share_times = sim_share_times;
    longmix::SimResult result = longmix::simulate_dataset(setting);

    std::filesystem::create_directories(sim_out);
    longmix::write_long_csv(sim_out + "/data.csv", result.data);
    {
      longmix::ModelConfig model;
      model.markers = result.data.markers;
      std::ofstream mout(sim_out + "/model.json");
      mout << longmix::model_config_to_json(model).dump(2) << '\n';
    }
    {
      std::ofstream tout(sim_out + "/truth.csv");
      tout << "subject,component";
      for (int j = 0; j < result.b_true.cols(); ++j) {
        tout << ",b_" << (j + 1);
      }
      tout << '\n';
      for (std::size_t i = 0; i < result.data.subjects.size(); ++i) {
        tout << result.data.subjects[i].id << ',' << (result.truth[i] + 1);
        for (int j = 0; j < result.b_true.cols(); ++j) {
          tout << ',' << format_g17(result.b_true(i, j));
        }
        tout << '\n';
      }
    }
    write_json_file(sim_out + "/manifest.json",
                    json{{"command", "simulate"},
                         {"preset", sim_preset_name},
                         {"counts", setting.counts},
                         {"seed", setting.seed},
                         {"share_times", setting.share_times},
                         {"package_version", longmix::kVersion}});
    json done{{"written", {sim_out + "/data.csv", sim_out + "/model.json",
                           sim_out + "/truth.csv",
                           sim_out + "/manifest.json"}},
              {"subjects", static_cast<int>(result.data.subjects.size())}};
    std::cout << done.dump() << std::endl;
    return 0;
  }

  if (*fit) {
    longmix::ModelConfig model = longmix::load_model_config(fit_model);
    longmix::ValidatedDataset data =
        load_dataset(fit_data, fit_attrs, model);

    mcmc.adapt = !fit_no_adapt;
    mcmc.prior_only = fit_prior_only;
    mcmc.threads = longmix::max_threads();

    longmix::CrudeEstimates crude = longmix::crude_random_effects(data);
    std::vector<std::string> warnings;
    longmix::PriorSpec prior = longmix::default_hyperparameters(
        crude.b, fit_k, model.prior, &warnings);
    for (const std::string& w : warnings) {
      std::cerr << "warning: " << w << std::endl;
    }

    longmix::ChainSample sample =
        longmix::run_chain(data, fit_k, prior, mcmc);

    int permuted = 0;
    if (!fit_no_relabel && fit_k > 1) {
      std::vector<std::vector<int>> perms =
          longmix::stephens_relabel(sample.allocprobs);
      permuted = longmix::apply_permutations(&sample, perms);
    }

    std::vector<std::string> ids;
    for (int i = 0; i < data.n_subjects(); ++i) {
      ids.push_back(data.subject_id(i));
    }
    json extra{{"data_path", fit_data},
               {"attrs_path", fit_attrs},
               {"model_path", fit_model},
               {"relabeled", !fit_no_relabel && fit_k > 1},
               {"permuted_draws", permuted},
               {"warnings", warnings}};
    longmix::write_fit_dir(fit_out, sample, model, ids, extra);
    json done{{"written",
               {fit_out + "/params.csv", fit_out + "/allocprob.bin",
                fit_out + "/manifest.json"}},
              {"acceptance_random_effects",
               sample.acceptance.random_effects},
              {"permuted_draws", permuted}};
    std::cout << done.dump() << std::endl;
    return 0;
  }

  if (*cls) {
    longmix::FitResult fitres = longmix::read_fit_dir(cls_fit);
    if (cls_data.empty()) cls_data = fitres.manifest.value("data_path", "");
    if (cls_attrs.empty()) cls_attrs = fitres.manifest.value("attrs_path", "");
    if (cls_data.empty()) {
      throw longmix::ValidationError(
          "no --data given and the fit records no data path");
    }
    if (cls_out.empty()) cls_out = cls_fit + "/classification.csv";
    longmix::ValidatedDataset data =
        load_dataset(cls_data, cls_attrs, fitres.model);
    check_subjects_match(data, fitres.subject_ids);

    longmix::ProbBackend backend = cls_backend == "marginal"
                                       ? longmix::ProbBackend::marginal
                                       : longmix::ProbBackend::augmented;
    longmix::ComponentProbResult probs = longmix::posterior_component_probs(
        fitres.sample, data, backend, cls_ml.options());
    longmix::ThresholdedClassification cl =
        longmix::classify_thresholded(probs.draws, cls_level, cls_threshold);
    if (!cls_defer) {
      // without --defer everybody gets the maximum-probability component
      longmix::Classification map_cl = longmix::classify(cl.pi_hat);
      cl.assignment = map_cl.assignment;
      std::fill(cl.deferred.begin(), cl.deferred.end(), false);
    }

    std::ofstream out(cls_out);
    if (!out) {
      throw longmix::ValidationError("cannot write '" + cls_out + "'");
    }
    out << "subject,assigned,deferred";
    for (int k = 0; k < fitres.sample.K; ++k) out << ",pi_" << (k + 1);
    out << ",hpd_lower,hpd_upper\n";
    int deferred_count = 0;
    for (int i = 0; i < data.n_subjects(); ++i) {
      out << data.subject_id(i) << ','
          << (cl.assignment[i] < 0 ? 0 : cl.assignment[i] + 1) << ','
          << (cl.deferred[i] ? 1 : 0);
      for (int k = 0; k < fitres.sample.K; ++k) {
        out << ',' << format_g17(cl.pi_hat(i, k));
      }
      out << ',' << format_g17(cl.hpd[i].first) << ','
          << format_g17(cl.hpd[i].second) << '\n';
      if (cl.deferred[i]) ++deferred_count;
    }
    json done{{"written", {cls_out}},
              {"deferred", deferred_count},
              {"subjects", data.n_subjects()}};
    std::cout << done.dump() << std::endl;
    return 0;
  }

  if (*ped) {
    if (ped_pairs.empty() == ped_krange.empty()) {
      throw longmix::ValidationError(
          "ped needs exactly one of --pair or --K-range");
    }
    std::vector<longmix::PedRecord> records;
    if (!ped_pairs.empty()) {
      for (const std::string& pair : ped_pairs) {
        std::size_t colon = pair.find(':');
        if (colon == std::string::npos) {
          throw longmix::ValidationError("--pair expects DIR_A:DIR_B, got '" +
                                         pair + "'");
        }
        longmix::FitResult a = longmix::read_fit_dir(pair.substr(0, colon));
        longmix::FitResult b = longmix::read_fit_dir(pair.substr(colon + 1));
        longmix::ValidatedDataset data =
            load_dataset(ped_data, ped_attrs, a.model);
        check_subjects_match(data, a.subject_ids);
        check_subjects_match(data, b.subject_ids);
        records.push_back(longmix::penalized_expected_deviance(
            a.sample, b.sample, data, ped_ml.options()));
      }
    } else {
      if (ped_model.empty()) {
        throw longmix::ValidationError("--K-range needs --model");
      }
      auto [k_lo, k_hi] = parse_k_range(ped_krange);
      longmix::ModelConfig model = longmix::load_model_config(ped_model);
      longmix::ValidatedDataset data =
          load_dataset(ped_data, ped_attrs, model);
      longmix::CrudeEstimates crude = longmix::crude_random_effects(data);
      ped_mcmc.adapt = true;
      ped_mcmc.threads = std::max(1, longmix::max_threads() / 2);
      for (int k = k_lo; k <= k_hi; ++k) {
        longmix::PriorSpec prior = longmix::default_hyperparameters(
            crude.b, k, model.prior, nullptr);
        // the paired chains differ only in seed and run concurrently
        longmix::McmcConfig mcmc_a = ped_mcmc, mcmc_b = ped_mcmc;
        mcmc_a.seed = ped_mcmc.seed + 2 * std::uint64_t(k - k_lo);
        mcmc_b.seed = mcmc_a.seed + 1;
        longmix::ChainSample chain_a;
        std::exception_ptr err_a;
        std::thread worker([&] {
          try {
            chain_a = longmix::run_chain(data, k, prior, mcmc_a);
          } catch (...) {
            err_a = std::current_exception();
          }
        });
        longmix::ChainSample chain_b;
        std::exception_ptr err_b;
        try {
          chain_b = longmix::run_chain(data, k, prior, mcmc_b);
        } catch (...) {
          err_b = std::current_exception();
        }
        worker.join();
        if (err_a) std::rethrow_exception(err_a);
        if (err_b) std::rethrow_exception(err_b);
        records.push_back(longmix::penalized_expected_deviance(
            chain_a, chain_b, data, ped_ml.options()));
      }
    }
    std::filesystem::create_directories(ped_out);
    std::string csv_path = ped_out + "/ped.csv";
    std::ofstream out(csv_path);
    if (!out) {
      throw longmix::ValidationError("cannot write '" + csv_path + "'");
    }
    out << "K,expected_deviance,p_opt,ped,estimator,mc_se,"
           "degenerate_subjects\n";
    for (const longmix::PedRecord& r : records) {
      out << r.K << ',' << format_g17(r.expected_deviance) << ','
          << format_g17(r.p_opt) << ',' << format_g17(r.ped) << ','
          << r.estimator << ',' << format_g17(r.mc_se) << ','
          << r.degenerate_subjects << '\n';
    }
    int selected = longmix::select_K(records);
    write_json_file(
        ped_out + "/manifest.json",
        json{{"command", "ped"},
             {"data_path", ped_data},
             {"attrs_path", ped_attrs},
             {"pairs", ped_pairs},
             {"model_path", ped_model},
             {"k_range", ped_krange},
             {"config",
              {{"keep", ped_mcmc.keep},
               {"thin", ped_mcmc.thin},
               {"burnin", ped_mcmc.burnin},
               {"seed", ped_mcmc.seed}}},
             {"marglik",
              {{"method", ped_ml.method},
               {"mc_draws", ped_ml.mc_draws},
               {"seed", ped_ml.seed}}},
             {"selected_K", selected},
             {"package_version", longmix::kVersion}});
    json done{{"written", {csv_path, ped_out + "/manifest.json"}},
              {"selected_K", selected}};
    std::cout << done.dump() << std::endl;
    return 0;
  }

  if (*smry) {
    longmix::FitResult fitres = longmix::read_fit_dir(smry_fit);
    if (smry_out.empty()) smry_out = smry_fit + "/summary.json";
    if (smry_curves.empty()) smry_curves = smry_fit + "/curves.csv";
    std::vector<longmix::ParameterSummary> table =
        longmix::summarize(fitres.sample, smry_level);
    json params = json::array();
    for (const longmix::ParameterSummary& p : table) {
      params.push_back({{"name", p.name},
                        {"mean", p.mean},
                        {"sd", p.sd},
                        {"median", p.median},
                        {"hpd_lower", p.hpd_lower},
                        {"hpd_upper", p.hpd_upper}});
    }
    json out{{"parameters", params},
             {"K", fitres.sample.K},
             {"hpd_level", smry_level},
             {"acceptance", fitres.manifest.at("acceptance")},
             {"config", fitres.manifest.at("config")}};
    write_json_file(smry_out, out);

    // Cluster-specific marginal mean curves E[Y | u = k] on a time grid,
    // evaluated at the posterior means of (mu_k, D_k, alpha).
    double grid_lo = 0.0, grid_hi = 0.0;
    int grid_n = 0;
    {
      std::size_t c1 = smry_grid.find(':');
      std::size_t c2 = c1 == std::string::npos ? c1 : smry_grid.find(':', c1 + 1);
      try {
        if (c2 == std::string::npos) throw std::invalid_argument(smry_grid);
        grid_lo = std::stod(smry_grid.substr(0, c1));
        grid_hi = std::stod(smry_grid.substr(c1 + 1, c2 - c1 - 1));
        grid_n = std::stoi(smry_grid.substr(c2 + 1));
      } catch (const std::exception&) {
        throw longmix::ValidationError("--grid expects LO:HI:POINTS, got '" +
                                       smry_grid + "'");
      }
      if (!(grid_hi > grid_lo) || grid_n < 2) {
        throw longmix::ValidationError("--grid expects LO < HI and at least "
                                       "two points");
      }
    }
    const longmix::ChainSample& sample = fitres.sample;
    const longmix::ParamLayout& lay = sample.layout;
    Eigen::VectorXd post_mean = sample.draws.colwise().mean();
    std::ofstream cf(smry_curves);
    if (!cf) {
      throw longmix::ValidationError("cannot write '" + smry_curves + "'");
    }
    cf << "marker,component,time,mean\n";
    int q_off = 0;
    for (std::size_t r = 0; r < fitres.model.markers.size(); ++r) {
      const longmix::MarkerSpec& mk = fitres.model.markers[r];
      int qr = static_cast<int>(mk.random.size());
      int pr = static_cast<int>(mk.fixed.size());
      Eigen::VectorXd alpha(pr);
      for (int j = 0; j < pr; ++j) {
        alpha[j] = post_mean[lay.alpha_index(static_cast<int>(r)) + j];
      }
      for (int k = 0; k < sample.K; ++k) {
        Eigen::VectorXd mu(qr);
        for (int j = 0; j < qr; ++j) {
          mu[j] = post_mean[lay.mu_index(k, q_off + j)];
        }
        Eigen::MatrixXd d_full = longmix::unvech(
            post_mean.segment(lay.d_index(k), lay.vech_len()));
        Eigen::MatrixXd d_block = d_full.block(q_off, q_off, qr, qr);
        for (int g = 0; g < grid_n; ++g) {
          double t = grid_lo + (grid_hi - grid_lo) * g / (grid_n - 1);
          Eigen::VectorXd zrow(qr), xrow(pr);
          for (int j = 0; j < qr; ++j) zrow[j] = grid_value(mk.random[j], t);
          for (int j = 0; j < pr; ++j) xrow[j] = grid_value(mk.fixed[j], t);
          double m = zrow.dot(mu) + (pr > 0 ? xrow.dot(alpha) : 0.0);
          double v = zrow.dot(d_block * zrow);
          cf << mk.name << ',' << (k + 1) << ',' << format_g17(t) << ','
             << format_g17(marginal_mean(mk.family, m, v)) << '\n';
        }
      }
      q_off += qr;
    }
    json done{{"written", {smry_out, smry_curves}}};
    std::cout << done.dump() << std::endl;
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const longmix::ValidationError& e) {
    emit_error("validation", e.what());
    return 2;
  } catch (const longmix::NumericalError& e) {
    emit_error("numerical", e.what());
    return 3;
  } catch (const std::exception& e) {
    emit_error("internal", e.what());
    return 1;
  }
}
