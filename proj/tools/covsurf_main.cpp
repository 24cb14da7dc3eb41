// Command-line front end for the covsurf library: simulate benchmark data,
// fit the clustering + selection pipeline, predict with a saved model, and
// run the comparison / leave-one-out harnesses.
//
// Exit codes: 0 success, 1 usage error, 2 runtime failure,
//             3 predict finished but some rows could not be scored.

#include <algorithm>
#include <cstdint>
#include <exception>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <boost/program_options.hpp>
#include <nlohmann/json.hpp>

#include "covsurf/covsurf.hpp"

namespace po = boost::program_options;

namespace {

constexpr const char* kVersion = "1.0.0";

void print_usage(std::ostream& os, const po::options_description& global) {
  os << "usage: covsurf [global options] <command> [options]\n"
        "\n"
        "commands:\n"
        "  simulate   generate a correlated mixed-type benchmark dataset\n"
        "  fit        cluster variables, pick the cluster count, select\n"
        "             clusters and train the final forest\n"
        "  predict    apply a saved model to new rows\n"
        "  benchmark  compare cluster-based and plain variable selection on\n"
        "             simulated data\n"
        "  loocv      leave-one-out error of the whole pipeline\n"
        "\n"
     << global
     << "\nrun 'covsurf <command> --help' for that command's options\n";
}

// Parses a subcommand's arguments; prints help and returns false when --help
// was asked for, otherwise enforces required options.
bool parse_sub(const std::vector<std::string>& args, const std::string& name,
               const po::options_description& opts, po::variables_map& vm) {
  po::store(po::command_line_parser(args).options(opts).run(), vm);
  if (vm.count("help")) {
    std::cout << "usage: covsurf " << name << " [options]\n\n" << opts;
    return false;
  }
  po::notify(vm);
  return true;
}

std::optional<covsurf::Schema> optional_schema(const po::variables_map& vm) {
  if (!vm.count("schema")) return std::nullopt;
  return covsurf::load_schema(vm["schema"].as<std::string>());
}

void write_curve(const covsurf::KSweepCurve& curve, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << "k,oob\n";
  for (std::size_t i = 0; i < curve.k.size(); ++i) {
    out << curve.k[i] << ',' << covsurf::format_double(curve.oob[i]) << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

int run_simulate(const std::vector<std::string>& args) {
  po::options_description opts("simulate options");
  opts.add_options()  //
      ("n", po::value<int>()->default_value(600), "number of rows")  //
      ("rho", po::value<double>()->default_value(0.9),
       "within-block correlation of the latent design")  //
      ("sigma2", po::value<double>()->default_value(1.0),
       "independent noise variance added to every latent coordinate")  //
      ("seed", po::value<std::uint64_t>()->default_value(0),
       "generator seed")  //
      ("theoretical-median", po::bool_switch()->default_value(false),
       "dichotomize latent values at 0 instead of the sample median")  //
      ("out", po::value<std::string>()->required(),
       "output prefix; writes <prefix>.csv, <prefix>.labels.csv and "
       "<prefix>.schema.json")  //
      ("help,h", "show this help");
  po::variables_map vm;
  if (!parse_sub(args, "simulate", opts, vm)) return 0;

  covsurf::SimConfig config;
  config.n = vm["n"].as<int>();
  config.rho = vm["rho"].as<double>();
  config.sigma2 = vm["sigma2"].as<double>();
  config.seed = vm["seed"].as<std::uint64_t>();
  config.theoretical_median = vm["theoretical-median"].as<bool>();
  const covsurf::SimulatedData data = covsurf::generate(config);

  const std::string prefix = vm["out"].as<std::string>();
  covsurf::write_csv(data.frame, prefix + ".csv");
  covsurf::write_labels(data.labels, prefix + ".labels.csv");
  covsurf::write_schema(data.frame.schema(), prefix + ".schema.json");
  std::cout << "wrote " << prefix << ".csv (" << data.frame.n_rows()
            << " rows, " << data.frame.n_cols() << " columns), " << prefix
            << ".labels.csv, " << prefix << ".schema.json\n";
  return 0;
}

int run_fit(const std::vector<std::string>& args) {
  po::options_description opts("fit options");
  opts.add_options()  //
      ("data", po::value<std::string>()->required(),
       "training rows (CSV with a header line)")  //
      ("labels", po::value<std::string>()->required(),
       "training labels (single-column CSV)")  //
      ("schema", po::value<std::string>(),
       "column schema (JSON); column types are inferred when omitted")  //
      ("kmin", po::value<int>()->default_value(2),
       "smallest cluster count to try")  //
      ("kmax", po::value<int>()->default_value(0),
       "largest cluster count to try (0 = derived bound)")  //
      ("trees", po::value<int>()->default_value(500),
       "trees per forest in the selection steps and the final model")  //
      ("seed", po::value<std::uint64_t>()->default_value(0),
       "seed for every randomized step")  //
      ("out-model", po::value<std::string>()->required(),
       "where to write the fitted model (JSON)")  //
      ("out-curve", po::value<std::string>(),
       "optional CSV of the cluster-count sweep (columns k,oob)")  //
      ("help,h", "show this help");
  po::variables_map vm;
  if (!parse_sub(args, "fit", opts, vm)) return 0;

  const covsurf::MixedDataFrame df =
      covsurf::load_csv(vm["data"].as<std::string>(), optional_schema(vm));
  const covsurf::LabelVector y =
      covsurf::load_labels(vm["labels"].as<std::string>());

  covsurf::PipelineParams params;
  params.kmin = vm["kmin"].as<int>();
  params.kmax = vm["kmax"].as<int>();
  params.final_trees = vm["trees"].as<int>();
  params.vsurf.trees = vm["trees"].as<int>();
  const auto seed = vm["seed"].as<std::uint64_t>();

  const covsurf::CovsurfModel model = covsurf::fit(df, y, params, seed);
  covsurf::save_model(model, vm["out-model"].as<std::string>());
  if (vm.count("out-curve")) {
    write_curve(model.curve, vm["out-curve"].as<std::string>());
  }

  for (const auto& w : model.warnings) std::cerr << "warning: " << w << "\n";

  const auto at = std::find(model.curve.k.begin(), model.curve.k.end(),
                            model.k_star) -
                  model.curve.k.begin();
  std::cout << "rows: " << df.n_rows() << ", variables: " << df.n_cols()
            << "\n"
            << "cluster count K* = " << model.k_star
            << " (sweep minimum oob = "
            << covsurf::format_double(
                   model.curve.oob[static_cast<std::size_t>(at)])
            << ")\n";
  std::cout << "kept " << model.selected.size() << " of " << model.k_star
            << " clusters:";
  for (const int c : model.selected) std::cout << ' ' << (c + 1);
  std::cout << "\n";
  const covsurf::MixedDataFrame final_frame =
      covsurf::synthetic_frame(model.partition, df, model.selected);
  std::cout << "final forest out-of-bag error = "
            << covsurf::format_double(
                   covsurf::oob_error(model.final_forest, final_frame, y))
            << "\n"
            << "wrote " << vm["out-model"].as<std::string>() << "\n";
  return 0;
}

int run_predict(const std::vector<std::string>& args) {
  po::options_description opts("predict options");
  opts.add_options()  //
      ("model", po::value<std::string>()->required(),
       "fitted model (JSON, as written by 'fit')")  //
      ("data", po::value<std::string>()->required(),
       "rows to score (CSV with the training columns)")  //
      ("out", po::value<std::string>()->required(),
       "where to write predictions (single 'label' column, one row per "
       "input row)")  //
      ("help,h", "show this help");
  po::variables_map vm;
  if (!parse_sub(args, "predict", opts, vm)) return 0;

  const covsurf::CovsurfModel model =
      covsurf::load_model(vm["model"].as<std::string>());
  const covsurf::CsvTable table =
      covsurf::read_csv_table(vm["data"].as<std::string>());

  // Structural problems (wrong column set) invalidate the whole file.
  const covsurf::Schema& schema = model.schema;
  if (table.header.size() != schema.size()) {
    throw std::runtime_error(
        "schema mismatch: model expects " + std::to_string(schema.size()) +
        " columns, file has " + std::to_string(table.header.size()));
  }
  for (std::size_t j = 0; j < schema.size(); ++j) {
    if (table.header[j] != schema.columns[j].name) {
      throw std::runtime_error("schema mismatch: column " +
                               std::to_string(j + 1) + " is '" +
                               table.header[j] + "', model expects '" +
                               schema.columns[j].name + "'");
    }
  }

  const std::size_t n = table.rows.size();
  std::vector<std::string> labels(n);
  std::vector<std::pair<std::size_t, std::string>> failures;
  try {
    const covsurf::MixedDataFrame df =
        covsurf::frame_from_table(table, schema);
    const covsurf::LabelVector pred = covsurf::predict(model, df);
    for (std::size_t i = 0; i < n; ++i) labels[i] = pred.class_name(pred.id(i));
  } catch (const std::exception&) {
    // Some cell could not be interpreted; score row by row so the report
    // points at the rows that actually fail. Scored rows keep their labels.
    for (std::size_t i = 0; i < n; ++i) {
      const covsurf::CsvTable one{table.header, {table.rows[i]}};
      try {
        const covsurf::MixedDataFrame df = covsurf::frame_from_table(one, schema);
        const covsurf::LabelVector pred = covsurf::predict(model, df);
        labels[i] = pred.class_name(pred.id(0));
      } catch (const std::exception& e) {
        failures.emplace_back(i, e.what());
      }
    }
  }

  const std::string out_path = vm["out"].as<std::string>();
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + out_path);
  out << "label\n";
  for (const auto& label : labels) out << label << '\n';
  if (!out) throw std::runtime_error("write failed: " + out_path);

  if (!failures.empty()) {
    for (const auto& [row, message] : failures) {
      std::cerr << "row " << (row + 1) << ": " << message << "\n";
    }
    std::cerr << failures.size() << " of " << n
              << " rows could not be scored; their label cells are empty\n";
    return 3;
  }
  std::cout << "wrote " << out_path << " (" << n << " predictions)\n";
  return 0;
}

int run_benchmark(const std::vector<std::string>& args) {
  po::options_description opts("benchmark options");
  opts.add_options()  //
      ("preset", po::value<std::string>()->required(),
       "scenario: sim600 (600 training rows) or sim60 (60 training rows)")  //
      ("reps", po::value<int>()->default_value(10),
       "independently seeded final forests per method")  //
      ("replicate-datasets", po::value<int>()->default_value(1),
       "number of fresh training sets to draw")  //
      ("seed", po::value<std::uint64_t>()->default_value(0),
       "master seed")  //
      ("out", po::value<std::string>()->required(),
       "where to write test errors (CSV, one row per forest)")  //
      ("help,h", "show this help");
  po::variables_map vm;
  if (!parse_sub(args, "benchmark", opts, vm)) return 0;

  const std::string preset = vm["preset"].as<std::string>();
  if (preset != "sim600" && preset != "sim60") {
    throw po::error("unknown preset '" + preset +
                    "' (expected sim600 or sim60)");
  }
  const int reps = vm["reps"].as<int>();
  const int datasets = vm["replicate-datasets"].as<int>();
  if (reps < 1) throw po::error("--reps must be at least 1");
  if (datasets < 1) throw po::error("--replicate-datasets must be at least 1");
  const auto seed = vm["seed"].as<std::uint64_t>();

  // The test set is fixed across every dataset and rep.
  covsurf::SimConfig test_config;
  test_config.n = 600;
  test_config.seed = covsurf::derive_seed(seed, covsurf::stream::kBenchTestSet);
  const covsurf::SimulatedData test = covsurf::generate(test_config);

  const covsurf::PipelineParams params;

  const std::string out_path = vm["out"].as<std::string>();
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + out_path);
  if (datasets > 1) out << "dataset,";
  out << "cov_vsurf,cov_rf,vsurf,rf\n";

  std::vector<std::string> arms;
  std::vector<double> sums(4, 0.0);
  for (int d = 0; d < datasets; ++d) {
    covsurf::SimConfig train_config;
    train_config.n = preset == "sim600" ? 600 : 60;
    train_config.seed =
        covsurf::derive_seed(seed, covsurf::stream::kBenchDataset, d);
    const covsurf::SimulatedData train = covsurf::generate(train_config);
    const covsurf::CompareResult res = covsurf::compare_methods(
        train.frame, train.labels, test.frame, test.labels, params, reps,
        covsurf::derive_seed(seed, covsurf::stream::kBenchDataset, d, 1));
    arms = res.arms;
    for (int rep = 0; rep < reps; ++rep) {
      if (datasets > 1) out << (d + 1) << ',';
      for (std::size_t arm = 0; arm < res.arms.size(); ++arm) {
        out << (arm ? "," : "")
            << covsurf::format_double(res.errors[arm][rep]);
        sums[arm] += res.errors[arm][rep];
      }
      out << '\n';
    }
    std::cout << "dataset " << (d + 1) << ": K* = " << res.k_star << ", kept "
              << res.selected_clusters.size() << " clusters, "
              << res.vsurf_variables.size()
              << " original variables selected\n";
  }
  if (!out) throw std::runtime_error("write failed: " + out_path);

  const double runs = static_cast<double>(reps) * datasets;
  std::cout << "mean test error over " << reps * datasets << " runs:";
  for (std::size_t arm = 0; arm < arms.size(); ++arm) {
    std::cout << (arm ? ", " : " ") << arms[arm] << " = "
              << covsurf::format_double(sums[arm] / runs);
  }
  std::cout << "\nwrote " << out_path << "\n";
  return 0;
}

int run_loocv(const std::vector<std::string>& args) {
  po::options_description opts("loocv options");
  opts.add_options()  //
      ("data", po::value<std::string>()->required(),
       "rows (CSV with a header line)")  //
      ("labels", po::value<std::string>()->required(),
       "labels (single-column CSV)")  //
      ("schema", po::value<std::string>(),
       "column schema (JSON); column types are inferred when omitted")  //
      ("kmin", po::value<int>()->default_value(2),
       "smallest cluster count to try")  //
      ("kmax", po::value<int>()->default_value(0),
       "largest cluster count to try (0 = derived bound)")  //
      ("trees", po::value<int>()->default_value(500),
       "trees per forest in the selection steps and the final model")  //
      ("seed", po::value<std::uint64_t>()->default_value(0),
       "master seed; each fold derives its own")  //
      ("out", po::value<std::string>()->required(),
       "where to write the per-fold report (JSON)")  //
      ("help,h", "show this help");
  po::variables_map vm;
  if (!parse_sub(args, "loocv", opts, vm)) return 0;

  const covsurf::MixedDataFrame df =
      covsurf::load_csv(vm["data"].as<std::string>(), optional_schema(vm));
  const covsurf::LabelVector y =
      covsurf::load_labels(vm["labels"].as<std::string>());

  covsurf::PipelineParams params;
  params.kmin = vm["kmin"].as<int>();
  params.kmax = vm["kmax"].as<int>();
  params.final_trees = vm["trees"].as<int>();
  params.vsurf.trees = vm["trees"].as<int>();

  const covsurf::LoocvResult res =
      covsurf::loocv(df, y, params, vm["seed"].as<std::uint64_t>());

  nlohmann::json doc;
  doc["error"] = res.error;
  doc["folds"] = res.folds;
  doc["completed"] = res.folds - res.failed.size();
  doc["failed"] = res.failed;
  doc["failure_reasons"] = res.failure_reasons;
  doc["predicted"] = res.predicted;
  const std::string out_path = vm["out"].as<std::string>();
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + out_path);
  out << doc.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed: " + out_path);

  std::cout << "leave-one-out error = " << covsurf::format_double(res.error)
            << " over " << (res.folds - res.failed.size()) << " of "
            << res.folds << " folds\n"
            << "wrote " << out_path << "\n";
  if (!res.failed.empty()) {
    std::cerr << res.failed.size() << " folds failed; see " << out_path
              << "\n";
  }
  return 0;
}

int dispatch(int argc, char** argv) {
  po::options_description global("global options");
  global.add_options()  //
      ("threads", po::value<int>(),
       "maximum worker threads (default: COVSURF_THREADS or all cores); "
       "results never depend on this")  //
      ("help,h", "show this help")  //
      ("version", "print the version and exit");
  po::options_description hidden;
  hidden.add_options()  //
      ("command", po::value<std::string>())  //
      ("subargs", po::value<std::vector<std::string>>());
  po::positional_options_description pos;
  pos.add("command", 1).add("subargs", -1);
  po::options_description all;
  all.add(global).add(hidden);

  po::variables_map vm;
  const po::parsed_options parsed = po::command_line_parser(argc, argv)
                                        .options(all)
                                        .positional(pos)
                                        .allow_unregistered()
                                        .run();
  po::store(parsed, vm);

  if (vm.count("version")) {
    std::cout << "covsurf " << kVersion << "\n";
    return 0;
  }
  if (!vm.count("command")) {
    if (vm.count("help")) {
      print_usage(std::cout, global);
      return 0;
    }
    print_usage(std::cerr, global);
    return 1;
  }
  if (vm.count("threads")) {
    const int threads = vm["threads"].as<int>();
    if (threads < 1) throw po::error("--threads must be at least 1");
    covsurf::set_max_threads(threads);
  }

  const std::string command = vm["command"].as<std::string>();
  std::vector<std::string> args =
      po::collect_unrecognized(parsed.options, po::include_positional);
  const auto self = std::find(args.begin(), args.end(), command);
  if (self != args.end()) args.erase(self);
  if (vm.count("help")) args.push_back("--help");

  if (command == "simulate") return run_simulate(args);
  if (command == "fit") return run_fit(args);
  if (command == "predict") return run_predict(args);
  if (command == "benchmark") return run_benchmark(args);
  if (command == "loocv") return run_loocv(args);
  throw po::error("unknown command '" + command +
                  "' (expected simulate, fit, predict, benchmark or loocv)");
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const po::error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
