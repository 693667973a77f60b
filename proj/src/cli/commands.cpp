#include "fairbound/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/core.h>
#include <fmt/ostream.h>

#include "fairbound/csv.hpp"
#include "fairbound/dataset.hpp"
#include "fairbound/error.hpp"
#include "fairbound/estimators.hpp"
#include "fairbound/manifest.hpp"
#include "fairbound/model.hpp"
#include "fairbound/proxy.hpp"
#include "fairbound/random.hpp"
#include "fairbound/simulator.hpp"
#include "fairbound/trainer.hpp"

namespace fairbound::cli {
namespace fs = std::filesystem;

namespace {

struct Common {
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  int jobs = 1;
  int bins = 10;
};

struct AuditOpts {
  std::string data, predictions, model, metric = "demographic_parity";
};

struct TrainOpts {
  std::string data, metric = "demographic_parity", family = "logistic_regression";
  double alpha = 0.1, train_frac = 0.8, labeled_frac = 0.01, eta = 0.005, lr = 0.001;
  int iterations = 1000, batch_size = 1024, primal_steps = 0;
};

struct SimulateOpts {
  int p = 10;
  std::size_t n = 10000;
  double labeled_frac = 1.0;
};

struct ProxyOpts {
  std::string data, first_table, surname_table, geo_table;
  std::optional<double> prior;
  bool drop_unresolved = false;
};

struct SweepOpts {
  std::string data, metric = "demographic_parity", family = "logistic_regression";
  int p = 10, seeds = 10, iterations = 1000;
  std::size_t n = 10000;
  std::vector<double> alphas{0.04, 0.06, 0.08, 0.10};
  double train_frac = 0.8, labeled_frac = 0.1;
};

std::span<const double> as_span(const Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, fmt::format("cannot write {}", path.string()));
  out << text;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt::format("{:.6f}", *v) : std::string("n/a"); }

void print_report(std::ostream& out, const DisparityReport& r) {
  const auto widened = widened_interval(r);
  fmt::print(out, "{:<22}{}\n", "metric", r.metric);
  fmt::print(out, "{:<22}{}\n", "rows in event", r.n_event);
  fmt::print(out, "{:<22}{}\n", "labeled rows in event", r.n_labeled_event);
  fmt::print(out, "{:<22}{:>12.6f}  [{:.6f}, {:.6f}]\n", "D_prob (+-2 SE)", r.d_prob, r.d_prob - 2 * r.se_prob,
             r.d_prob + 2 * r.se_prob);
  fmt::print(out, "{:<22}{:>12.6f}  [{:.6f}, {:.6f}]\n", "D_lin (+-2 SE)", r.d_lin, r.d_lin - 2 * r.se_lin,
             r.d_lin + 2 * r.se_lin);
  fmt::print(out, "{:<22}{:>12}\n", "D_true (labeled)", fmt_opt(r.d_true));
  fmt::print(out, "{:<22}{:>12.3e}\n", "Cov(f,b|B)", r.cov_b_given_B);
  fmt::print(out, "{:<22}{:>12.3e}\n", "Cov(f,B|b)", r.cov_B_given_b);
  fmt::print(out, "{:<22}{}\n", "verdict", to_string(r.verdict));
  if (widened) fmt::print(out, "{:<22}[{:.6f}, {:.6f}]\n", "bound (+-2 SE)", widened->first, widened->second);
  for (const auto& w : r.warnings) fmt::print(out, "warning: {}\n", w);
}

Eigen::VectorXd read_predictions(const fs::path& path, std::size_t n) {
  const CsvTable csv = read_csv_table(path);
  std::optional<std::size_t> col = csv.column("prediction");
  if (!col) col = csv.column("score");
  if (!col && csv.header.size() == 1) col = 0;
  if (!col) throw Error(ErrorKind::kMissingColumn, fmt::format("{}: expected a 'prediction' column", path.string()));
  if (csv.rows.size() != n) {
    throw Error(ErrorKind::kValidation,
                fmt::format("{}: {} predictions for {} data rows", path.string(), csv.rows.size(), n));
  }
  Eigen::VectorXd out(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto v = parse_double(csv.rows[i][*col]);
    if (!v) throw Error(ErrorKind::kValidation, fmt::format("{}: row {}: non-numeric prediction", path.string(), i + 1));
    out[static_cast<Eigen::Index>(i)] = *v;
  }
  return out;
}

Model read_model(const fs::path& path, const Dataset& ds) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, fmt::format("cannot open {}", path.string()));
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kValidation, fmt::format("{}: {}", path.string(), e.what()));
  }
  std::string hash;
  Model m = model_from_json(j, &hash);
  if (!hash.empty() && hash != feature_schema_hash(ds.feature_names())) {
    throw Error(ErrorKind::kValidation,
                fmt::format("{}: model was trained on a different feature schema than the data", path.string()));
  }
  return m;
}

std::string iterate_csv(const std::vector<const TrainResult*>& runs) {
  CsvTable t;
  t.header = {"side", "iteration", "loss", "d_lin", "cov_b_given_B", "cov_B_given_b", "mu_L", "mu_b_given_B",
              "mu_B_given_b", "feasible", "max_violation", "skipped_batches"};
  for (const auto* run : runs) {
    for (const auto& r : run->log) {
      t.rows.push_back({std::string(to_string(run->side)), std::to_string(r.iteration), format_double(r.loss),
                        format_double(r.d_lin), format_double(r.cov_b_given_B), format_double(r.cov_B_given_b),
                        format_double(r.duals.mu_L), format_double(r.duals.mu_b_given_B),
                        format_double(r.duals.mu_B_given_b), r.feasible ? "1" : "0", format_double(r.max_violation),
                        std::to_string(r.skipped_batches)});
    }
  }
  std::string out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + cells[i];
    out += '\n';
  };
  line(t.header);
  for (const auto& r : t.rows) line(r);
  return out;
}

TrainConfig make_train_config(const std::string& metric, const std::string& family, double alpha, int iterations,
                              int bins, std::uint64_t seed) {
  TrainConfig c;
  c.metric = metric_spec(metric);
  c.family = parse_model_family(family);
  c.alpha = alpha;
  c.iterations = iterations;
  c.n_bins = bins;
  c.seed = seed;
  return c;
}

// Runs `count` independent tasks on up to `jobs` threads; task i writes only slot i.
void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& task) {
  const auto workers = static_cast<std::size_t>(std::clamp<int>(jobs, 1, static_cast<int>(std::max<std::size_t>(count, 1))));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto body = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < count;) {
      try {
        task(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    body();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(body);
  }
  if (failure) std::rethrow_exception(failure);
}

class Runner {
 public:
  Runner(std::ostream& out, std::ostream& err) : out_(out), err_(err) {}

  int audit(const Common& c, const AuditOpts& o, RunManifest& m) {
    const Dataset ds = load_csv(o.data);
    m.add_input(o.data);
    Eigen::VectorXd predictions;
    if (!o.model.empty()) {
      m.add_input(o.model);
      predictions = read_model(o.model, ds).scores(ds.features());
    } else if (!o.predictions.empty()) {
      m.add_input(o.predictions);
      predictions = read_predictions(o.predictions, ds.size());
    } else {
      throw Error(ErrorKind::kValidation, "audit needs --predictions or --model");
    }
    const DisparityReport r = fairbound::audit(ds, as_span(predictions), metric_spec(o.metric), c.bins);
    nlohmann::json j = to_json(r);
    if (auto w = widened_interval(r)) {
      j["lower_2se"] = w->first;
      j["upper_2se"] = w->second;
    } else {
      j["lower_2se"] = nullptr;
      j["upper_2se"] = nullptr;
    }
    output(m, c, "report.json", j.dump(2) + "\n");
    print_report(out_, r);
    return r.verdict == Verdict::kInconclusive ? kInconclusive : kOk;
  }

  int train(const Common& c, const TrainOpts& o, RunManifest& m) {
    const Dataset ds = load_csv(o.data);
    m.add_input(o.data);
    TrainConfig cfg = make_train_config(o.metric, o.family, o.alpha, o.iterations, c.bins, c.seed);
    cfg.eta_dual = o.eta;
    cfg.primal_lr = o.lr;
    cfg.batch_size = o.batch_size;
    cfg.primal_steps_per_iter = o.primal_steps;
    const Split split = make_split(ds, o.train_frac, o.labeled_frac, c.seed);

    TrainResult pos, neg;
    auto run_side = [&](std::size_t i) {
      (i == 0 ? pos : neg) = primal_dual_train(ds, split, cfg, i == 0 ? Side::kPositive : Side::kNegative);
    };
    parallel_for(2, c.jobs, run_side);
    const Selection sel = select_iterate(pos, neg);

    output(m, c, "model.json", to_json(sel.model, feature_schema_hash(ds.feature_names())).dump(2) + "\n");
    output(m, c, "iterates.csv", iterate_csv({&pos, &neg}));

    const Dataset test = ds.subset_by_ids(split.test_ids);
    const Eigen::VectorXd scores = sel.model.scores(test.features());
    nlohmann::json summary = {{"side", std::string(to_string(sel.side))},
                              {"iteration", sel.iteration},
                              {"train_loss", sel.loss},
                              {"feasible_found", sel.feasible_found},
                              {"n_train", split.train_ids.size()},
                              {"n_test", split.test_ids.size()},
                              {"n_labeled", split.labeled_ids.size()},
                              {"test_accuracy", accuracy(scores, test.outcome())}};
    if (test.num_labeled() > 0 && test.size() >= 3) {
      const DisparityReport r = fairbound::audit(test, as_span(scores), cfg.metric, c.bins);
      summary["test_audit"] = to_json(r);
      print_report(out_, r);
    } else {
      summary["test_audit"] = nullptr;
      fmt::print(err_, "warning: test split has no labeled rows; post-hoc audit skipped\n");
    }
    output(m, c, "train_summary.json", summary.dump(2) + "\n");
    fmt::print(out_, "selected {} side, iteration {}, train loss {:.6f}, feasible {}\n", to_string(sel.side),
               sel.iteration, sel.loss, sel.feasible_found);
    if (!sel.feasible_found) {
      fmt::print(err_, "no feasible iterate found; emitted the least-violating iterate\n");
      return kInfeasible;
    }
    return kOk;
  }

  int simulate(const Common& c, const SimulateOpts& o, RunManifest& m) {
    if (!(o.labeled_frac > 0.0 && o.labeled_frac <= 1.0)) {
      throw Error(ErrorKind::kValidation, "--labeled-frac must lie in (0, 1]");
    }
    const Simulation sim = generate(DgpConfig::preset(o.p, o.n, c.seed));
    Dataset data = sim.data;
    if (o.labeled_frac < 1.0) {
      std::vector<std::int64_t> ids(data.row_ids().begin(), data.row_ids().end());
      Engine rng = make_engine(c.seed, "simulate-labels");
      std::shuffle(ids.begin(), ids.end(), rng);
      ids.resize(static_cast<std::size_t>(std::max(1.0, std::round(o.labeled_frac * static_cast<double>(ids.size())))));
      std::sort(ids.begin(), ids.end());
      data = data.keep_labels_for(ids);
    }
    const fs::path csv = fs::path(c.out_dir) / "data.csv";
    write_csv(data, csv);
    m.outputs.push_back(csv.string());
    nlohmann::json truth = {{"config", to_json(DgpConfig::preset(o.p, o.n, c.seed))},
                            {"ground_truth", to_json(sim.truth)},
                            {"labeled_frac", o.labeled_frac}};
    output(m, c, "ground_truth.json", truth.dump(2) + "\n");
    fmt::print(out_, "wrote {} rows (p={}), realized demographic disparity {:.4f}\n", o.n, o.p,
               sim.truth.realized_dd);
    return kOk;
  }

  int proxy(const Common& c, const ProxyOpts& o, RunManifest& m) {
    const CsvTable in = read_csv_table(o.data);
    m.add_input(o.data);
    ProxyTables tables;
    auto load = [&](const std::string& path, LikelihoodTable& t) {
      if (path.empty()) return;
      t = load_likelihood_table(path);
      m.add_input(path);
    };
    load(o.first_table, tables.first_name);
    load(o.surname_table, tables.surname);
    load(o.geo_table, tables.geography);

    const auto first = in.column("first_name");
    const auto surname = in.column("surname");
    const auto geo = in.column("geo");
    const auto group = in.column("B");
    if (!geo) throw Error(ErrorKind::kMissingColumn, fmt::format("{}: missing column 'geo'", o.data));
    if (o.prior) {
      tables.prior = *o.prior;
    } else if (group) {
      double pos = 0, total = 0;
      for (const auto& row : in.rows) {
        if (auto v = parse_double(row[*group])) {
          pos += *v;
          total += 1;
        }
      }
      if (total > 0 && pos > 0 && pos < total) tables.prior = pos / total;
    }

    CsvTable outcsv;
    outcsv.header = in.header;
    outcsv.header.push_back("b");
    outcsv.header.push_back("proxy_method");
    std::vector<std::string> unresolved;
    std::vector<double> bs;
    std::vector<std::int8_t> gs;
    for (std::size_t r = 0; r < in.rows.size(); ++r) {
      const auto& row = in.rows[r];
      auto cell = [&](const std::optional<std::size_t>& col) -> std::optional<std::string_view> {
        if (!col) return std::nullopt;
        return std::string_view(row[*col]);
      };
      try {
        const Posterior post = posterior(cell(first), cell(surname), cell(geo), tables);
        auto out_row = row;
        out_row.push_back(format_double(post.probability));
        out_row.push_back(std::string(to_string(post.method)));
        outcsv.rows.push_back(std::move(out_row));
        if (group) {
          if (auto v = parse_double(row[*group])) {
            bs.push_back(post.probability);
            gs.push_back(static_cast<std::int8_t>(*v));
          }
        }
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::kUnresolvableRecord) throw;
        unresolved.push_back(fmt::format("row {}: {}", r + 1, e.what()));
      }
    }
    for (const auto& u : unresolved) fmt::print(err_, "unresolvable {}\n", u);
    if (!unresolved.empty() && (!o.drop_unresolved || outcsv.rows.empty())) {
      fmt::print(err_, "{} of {} records could not be resolved{}\n", unresolved.size(), in.rows.size(),
                 o.drop_unresolved ? "" : " (pass --drop-unresolved to drop them)");
      return kFailure;
    }
    const fs::path path = fs::path(c.out_dir) / "proxied.csv";
    write_csv_table(outcsv, path);
    m.outputs.push_back(path.string());
    if (!bs.empty()) {
      try {
        const CalibrationReport cal = calibration_report(bs, gs, c.bins);
        output(m, c, "calibration.json", to_json(cal).dump(2) + "\n");
      } catch (const Error& e) {
        fmt::print(err_, "warning: calibration report skipped: {}\n", e.what());
      }
    }
    fmt::print(out_, "resolved {} of {} records (prior {:.6f})\n", outcsv.rows.size(), in.rows.size(), tables.prior);
    return kOk;
  }

  int sweep(const Common& c, const SweepOpts& o, RunManifest& m) {
    if (o.seeds < 1 || o.alphas.empty()) throw Error(ErrorKind::kValidation, "sweep needs seeds >= 1 and alphas");
    std::optional<Dataset> fixed;
    if (!o.data.empty()) {
      fixed = load_csv(o.data);
      m.add_input(o.data);
    }
    struct Cell {
      double alpha;
      std::uint64_t seed;
      Selection sel;
      double test_accuracy = 0, test_d_true = 0, test_d_lin = 0, test_d_prob = 0;
    };
    struct Baseline {
      double accuracy = 0, d_true = 0;
    };
    const auto n_seeds = static_cast<std::size_t>(o.seeds);
    std::vector<Dataset> data(n_seeds);
    std::vector<Split> splits(n_seeds);
    std::vector<Baseline> base(n_seeds);
    const MetricSpec metric = metric_spec(o.metric);
    auto evaluate = [&](const Model& model, const Dataset& test, double& acc, double& d_true, double* d_lin,
                        double* d_prob) {
      const Eigen::VectorXd s = model.scores(test.features());
      acc = accuracy(s, test.outcome());
      const DisparityReport r = fairbound::audit(test, as_span(s), metric, c.bins);
      d_true = r.d_true.value_or(std::numeric_limits<double>::quiet_NaN());
      if (d_lin) *d_lin = r.d_lin;
      if (d_prob) *d_prob = r.d_prob;
    };
    parallel_for(n_seeds, c.jobs, [&](std::size_t k) {
      const std::uint64_t seed = c.seed + k;
      data[k] = fixed ? *fixed : generate(DgpConfig::preset(o.p, o.n, seed)).data;
      splits[k] = make_split(data[k], o.train_frac, o.labeled_frac, seed);
      const TrainConfig cfg = make_train_config(o.metric, o.family, o.alphas.front(), o.iterations, c.bins, seed);
      const Model u = train_unconstrained(data[k], splits[k], cfg);
      evaluate(u, data[k].subset_by_ids(splits[k].test_ids), base[k].accuracy, base[k].d_true, nullptr, nullptr);
    });
    std::vector<Cell> cells;
    for (double a : o.alphas) {
      for (std::size_t k = 0; k < n_seeds; ++k) cells.push_back({a, c.seed + k, {}});
    }
    parallel_for(cells.size(), c.jobs, [&](std::size_t i) {
      Cell& cell = cells[i];
      const auto k = static_cast<std::size_t>(cell.seed - c.seed);
      const TrainConfig cfg = make_train_config(o.metric, o.family, cell.alpha, o.iterations, c.bins, cell.seed);
      const auto pos = primal_dual_train(data[k], splits[k], cfg, Side::kPositive);
      const auto neg = primal_dual_train(data[k], splits[k], cfg, Side::kNegative);
      cell.sel = select_iterate(pos, neg);
      evaluate(cell.sel.model, data[k].subset_by_ids(splits[k].test_ids), cell.test_accuracy, cell.test_d_true,
               &cell.test_d_lin, &cell.test_d_prob);
    });

    std::string csv =
        "alpha,seed,side,iteration,feasible_found,train_loss,test_accuracy,test_d_true,test_d_lin,test_d_prob,"
        "unconstrained_accuracy,unconstrained_d_true\n";
    for (const auto& cell : cells) {
      const auto& b = base[static_cast<std::size_t>(cell.seed - c.seed)];
      csv += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{}\n", format_double(cell.alpha), cell.seed,
                         to_string(cell.sel.side), cell.sel.iteration, cell.sel.feasible_found ? 1 : 0,
                         format_double(cell.sel.loss), format_double(cell.test_accuracy),
                         format_double(cell.test_d_true), format_double(cell.test_d_lin),
                         format_double(cell.test_d_prob), format_double(b.accuracy), format_double(b.d_true));
    }
    output(m, c, "sweep.csv", csv);
    m.seeds.clear();
    for (std::size_t k = 0; k < n_seeds; ++k) m.seeds.push_back(c.seed + k);

    bool any_infeasible = false;
    fmt::print(out_, "{:>8} {:>14} {:>14} {:>10}\n", "alpha", "mean |D_true|", "mean accuracy", "feasible");
    for (double a : o.alphas) {
      double d = 0, acc = 0;
      int feas = 0, count = 0;
      for (const auto& cell : cells) {
        if (cell.alpha != a) continue;
        d += std::abs(cell.test_d_true);
        acc += cell.test_accuracy;
        feas += cell.sel.feasible_found;
        ++count;
      }
      any_infeasible = any_infeasible || feas < count;
      fmt::print(out_, "{:>8.3f} {:>14.4f} {:>14.4f} {:>7}/{}\n", a, d / count, acc / count, feas, count);
    }
    return any_infeasible ? kInfeasible : kOk;
  }

 private:
  void output(RunManifest& m, const Common& c, const std::string& name, const std::string& text) {
    const fs::path path = fs::path(c.out_dir) / name;
    write_text(path, text);
    m.outputs.push_back(path.string());
  }

  std::ostream& out_;
  std::ostream& err_;
};

bool flag_given(const std::vector<std::string>& args, std::string_view flag) {
  return std::any_of(args.begin(), args.end(), [&](const std::string& a) {
    return a == flag || (a.size() > flag.size() && a.compare(0, flag.size(), flag) == 0 && a[flag.size()] == '=');
  });
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fairness auditing and training with probabilistic protected attributes", "fairbound"};
  app.set_version_flag("--version", FAIRBOUND_VERSION);
  app.set_config("--config", "", "INI file; a [subcommand] section holds that subcommand's options");
  app.require_subcommand(1);

  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", common.seed, "Root seed (falls back to FAIRBOUND_SEED)");
    sub->add_option("--out-dir", common.out_dir, "Directory for outputs")->capture_default_str();
    sub->add_option("--jobs", common.jobs, "Worker threads for independent runs")->check(CLI::PositiveNumber);
    sub->add_option("--bins", common.bins, "Quantile bins for conditioning on b")->check(CLI::PositiveNumber);
  };

  AuditOpts ao;
  auto* audit = app.add_subcommand("audit", "Bound a model's disparity from proxy probabilities");
  audit->add_option("--data", ao.data, "Dataset CSV (features, y, b, optional B)")->required();
  audit->add_option("--predictions", ao.predictions, "CSV with a 'prediction' column");
  audit->add_option("--model", ao.model, "Model JSON to score the data with");
  audit->add_option("--metric", ao.metric, "Fairness metric")->capture_default_str();
  add_common(audit);

  TrainOpts to;
  auto* train = app.add_subcommand("train", "Train under the surrogate fairness constraint");
  train->add_option("--data", to.data, "Dataset CSV")->required();
  train->add_option("--metric", to.metric)->capture_default_str();
  train->add_option("--family", to.family, "logistic_regression | mlp_1x8_relu | linear_regression")
      ->capture_default_str();
  train->add_option("--alpha", to.alpha, "Disparity bound")->capture_default_str();
  train->add_option("--train-frac", to.train_frac)->capture_default_str();
  train->add_option("--labeled-frac", to.labeled_frac, "Labeled rows as a fraction of all rows")
      ->capture_default_str();
  train->add_option("--iterations", to.iterations)->capture_default_str();
  train->add_option("--eta", to.eta, "Dual step size")->capture_default_str();
  train->add_option("--lr", to.lr, "Primal learning rate")->capture_default_str();
  train->add_option("--batch-size", to.batch_size)->capture_default_str();
  train->add_option("--primal-steps", to.primal_steps, "Adam steps per dual update (0 = one epoch)")
      ->capture_default_str();
  add_common(train);

  SimulateOpts so;
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic dataset with exact proxies");
  simulate->add_option("--p", so.p, "Feature preset: 10, 20 or 50")->capture_default_str();
  simulate->add_option("--n", so.n, "Rows")->capture_default_str();
  simulate->add_option("--labeled-frac", so.labeled_frac, "Fraction of rows keeping B")->capture_default_str();
  add_common(simulate);

  ProxyOpts po;
  auto* proxy = app.add_subcommand("proxy", "Compute proxy probabilities from name and geography tables");
  proxy->add_option("--data", po.data, "CSV with first_name, surname, geo (optional B)")->required();
  proxy->add_option("--first-table", po.first_table);
  proxy->add_option("--surname-table", po.surname_table);
  proxy->add_option("--geo-table", po.geo_table)->required();
  proxy->add_option("--prior", po.prior, "Pr[B=1]; defaults to the base rate of B when present");
  proxy->add_flag("--drop-unresolved", po.drop_unresolved, "Drop records no table resolves");
  add_common(proxy);

  SweepOpts wo;
  auto* sweep = app.add_subcommand("sweep", "Train across alphas and seeds");
  sweep->add_option("--data", wo.data, "Dataset CSV; simulated per seed when absent");
  sweep->add_option("--p", wo.p)->capture_default_str();
  sweep->add_option("--n", wo.n)->capture_default_str();
  sweep->add_option("--alphas", wo.alphas)->delimiter(',')->capture_default_str();
  sweep->add_option("--seeds", wo.seeds, "Number of seeds, starting at --seed")->capture_default_str();
  sweep->add_option("--metric", wo.metric)->capture_default_str();
  sweep->add_option("--family", wo.family)->capture_default_str();
  sweep->add_option("--iterations", wo.iterations)->capture_default_str();
  sweep->add_option("--train-frac", wo.train_frac)->capture_default_str();
  sweep->add_option("--labeled-frac", wo.labeled_frac)->capture_default_str();
  add_common(sweep);

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kFailure;
  }

  CLI::App* chosen = app.get_subcommands().front();
  if (!flag_given(args, "--seed")) {
    if (const char* env = std::getenv("FAIRBOUND_SEED")) {
      try {
        common.seed = std::stoull(env);
      } catch (const std::exception&) {
        fmt::print(err, "error: FAIRBOUND_SEED='{}' is not an unsigned integer\n", env);
        return kFailure;
      }
    }
  }

  RunManifest manifest;
  manifest.subcommand = chosen->get_name();
  manifest.tool_version = FAIRBOUND_VERSION;
  manifest.started_at = utc_timestamp();
  // The resolved seed replaces whatever the option parser recorded, so an
  // environment-provided seed is hashed too.
  std::istringstream resolved(chosen->config_to_str(true, false));
  for (std::string line; std::getline(resolved, line);) {
    if (!line.starts_with("seed=")) manifest.config += line + "\n";
  }
  manifest.config += fmt::format("seed={}\n", common.seed);
  manifest.config_hash = sha256_hex(manifest.config);
  manifest.seeds = {common.seed};

  int code = kFailure;
  try {
    fs::create_directories(common.out_dir);
    Runner runner(out, err);
    if (chosen == audit) code = runner.audit(common, ao, manifest);
    else if (chosen == train) code = runner.train(common, to, manifest);
    else if (chosen == simulate) code = runner.simulate(common, so, manifest);
    else if (chosen == proxy) code = runner.proxy(common, po, manifest);
    else code = runner.sweep(common, wo, manifest);
  } catch (const Error& e) {
    fmt::print(err, "error ({}): {}\n", to_string(e.kind()), e.what());
    code = kFailure;
  } catch (const std::exception& e) {
    fmt::print(err, "error: {}\n", e.what());
    code = kFailure;
  }
  manifest.exit_code = code;
  manifest.finished_at = utc_timestamp();
  try {
    manifest.write(fs::path(common.out_dir) / "manifest.json");
  } catch (const std::exception& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kFailure;
  }
  return code;
}

}  // namespace fairbound::cli
