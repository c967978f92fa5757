#include "mrag/cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "mrag/config.hpp"
#include "mrag/corpus.hpp"
#include "mrag/error.hpp"
#include "mrag/evaluation.hpp"
#include "mrag/jsonl.hpp"
#include "mrag/laura_data.hpp"
#include "mrag/listwise_loss.hpp"
#include "mrag/log.hpp"
#include "mrag/pipeline.hpp"
#include "mrag/services.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace mrag::cli {

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

struct Common {
  std::string config_path;
  std::string run_dir;
  std::size_t parallelism = 0;
};

RunConfig config_or_default(const std::string& path) {
  return path.empty() ? RunConfig{} : load_config(path);
}

std::string path_or(const std::string& flag, const RunConfig& config, const std::string& key) {
  if (!flag.empty()) return flag;
  const auto it = config.paths.find(key);
  if (it == config.paths.end()) throw ConfigError("no --" + key + " given and paths." + key + " is not configured");
  return it->second;
}

std::string resolve_run_dir(const Common& common, const RunConfig& config) {
  std::string dir = common.run_dir;
  if (dir.empty()) {
    const auto root = config.paths.contains("output_root") ? config.paths.at("output_root") : std::string("runs");
    dir = (fs::path(root) / (config_hash(config) + "-" + utc_timestamp())).string();
  }
  fs::create_directories(dir);
  return dir;
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw PreconditionError("cannot open " + path + " for writing");
  out << j.dump(2) << '\n';
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

ServiceSet build_services(const RunConfig& config, const std::vector<std::string>& generator_names,
                          bool need_generators) {
  ServiceSet s;
  if (!config.retriever) throw ConfigError("endpoints.retriever is not configured");
  if (!config.reranker) throw ConfigError("endpoints.reranker is not configured");
  s.retriever = std::make_shared<services::HttpRetriever>(*config.retriever);
  s.reranker = std::make_shared<services::HttpReranker>(*config.reranker);
  std::vector<std::string> names = generator_names;
  if (names.empty()) {
    for (const auto& [id, e] : config.generators) names.push_back(id);
  }
  for (const auto& name : names) {
    const auto it = config.generators.find(name);
    if (it == config.generators.end()) throw ConfigError("endpoints.generators." + name + " is not configured");
    s.generators.emplace(name, std::make_shared<services::HttpGenerator>(it->second));
  }
  if (need_generators && s.generators.empty()) throw ConfigError("endpoints.generators is empty");
  return s;
}

PipelineOptions pipeline_options(const RunConfig& config) {
  PipelineOptions o;
  o.retrieval_top_k = config.retrieval_top_k;
  o.rerank_top_k = config.rerank_top_k;
  o.prompt_template = config.prompt_template;
  o.ngram.casefold = config.casefold;
  return o;
}

RunManifest start_manifest(const std::string& subcommand, const RunConfig& config) {
  RunManifest m;
  m.subcommand = subcommand;
  m.config_hash = config_hash(config);
  m.seed = config.seed;
  m.started_at = utc_timestamp();
  return m;
}

void finish_manifest(RunManifest& m, const std::string& dir) {
  m.finished_at = utc_timestamp();
  write_json((fs::path(dir) / ("manifest-" + m.subcommand + ".json")).string(), m);
}

// ---- subcommands ----------------------------------------------------------

struct ChunkArgs {
  std::string input, output;
};

int cmd_chunk(const Common& common, const ChunkArgs& a) {
  const RunConfig config = config_or_default(common.config_path);
  const std::string input = path_or(a.input, config, "documents");
  const std::string output = path_or(a.output, config, "chunks");
  const auto docs = load_documents(input, config.language_set);
  jsonl::Writer writer(output);
  std::size_t chunks = 0;
  std::vector<std::pair<std::string, std::string>> rejected;
  for (const auto& d : docs) {
    try {
      for (const auto& c : chunk_document(d, config.char_segmented_languages)) {
        writer.write(c);
        ++chunks;
      }
    } catch (const PreconditionError& e) {
      log::warn(e.what());
      rejected.emplace_back(d.doc_id, e.what());
    }
  }
  std::cout << "documents " << docs.size() << ", chunks " << chunks << ", rejected " << rejected.size() << '\n';
  for (const auto& [id, why] : rejected) std::cerr << "rejected " << id << ": " << why << '\n';
  return rejected.empty() ? kExitOk : kExitPartial;
}

struct RunArgs {
  std::string queries, chunks, generators;
};

int cmd_run(RunKind kind, const Common& common, const RunArgs& a) {
  const RunConfig config = load_config(common.config_path);
  const auto queries = load_queries(path_or(a.queries, config, "queries"));
  const CorpusIndex corpus = load_chunks(path_or(a.chunks, config, "chunks"));
  const ServiceSet services = build_services(config, split_list(a.generators), true);
  const std::string dir = resolve_run_dir(common, config);
  const std::string name = kind == RunKind::vanilla ? "run-vanilla" : "run-oracle";
  const std::string output = (fs::path(dir) / (kind == RunKind::vanilla ? "vanilla.jsonl" : "oracle.jsonl")).string();

  RunManifest manifest = start_manifest(name, config);
  const BatchSummary summary = run_batch(kind, queries, services, corpus, pipeline_options(config), output,
                                         effective_parallelism(config, common.parallelism));
  manifest.counts = json{{"queries", summary.total},
                         {"completed", summary.completed},
                         {"resumed", summary.resumed},
                         {"empty_retrieval", summary.flagged_empty},
                         {"failed", summary.failures.size()}};
  for (const auto& f : summary.failures) manifest.failures.emplace_back(f.query_id, f.reason);
  finish_manifest(manifest, dir);
  std::cout << output << '\n';
  return summary.failures.empty() ? kExitOk : kExitPartial;
}

struct EvalArgs {
  std::string run, judgments, chunks, out, prefix;
  std::size_t k = 5;
};

int cmd_eval(const EvalArgs& a) {
  bool oracle = false;
  {
    std::ifstream in(a.run);
    if (!in) throw PreconditionError("cannot open " + a.run);
    std::string line;
    while (std::getline(in, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      oracle = json::parse(line).contains("per_language");
      break;
    }
  }
  const std::string out_dir = a.out.empty() ? fs::path(a.run).parent_path().string() : a.out;
  if (!out_dir.empty()) fs::create_directories(out_dir);
  const std::string prefix = a.prefix.empty() ? (oracle ? "oracle" : "vanilla") : a.prefix;
  auto out_path = [&](const std::string& name) { return (fs::path(out_dir) / (prefix + "_" + name)).string(); };

  evaluation::EvalTables tables;
  if (oracle) {
    tables = evaluation::evaluate_oracle(jsonl::read_all<OracleRunRecord>(a.run));
  } else {
    const auto records = jsonl::read_all<VanillaRunRecord>(a.run);
    evaluation::JudgmentMap judgments;
    if (!a.judgments.empty()) judgments = evaluation::load_judgments(a.judgments);
    std::optional<CorpusIndex> corpus;
    if (!a.chunks.empty()) corpus = load_chunks(a.chunks);
    tables = evaluation::evaluate_vanilla(records, judgments, corpus ? &*corpus : nullptr, {a.k});
    tsv::write(out_path("correlation.tsv"), tables.correlation);
  }
  tsv::write(out_path("per_query.tsv"), tables.per_query);
  tsv::write(out_path("per_language.tsv"), tables.per_language);
  std::cout << out_path("per_language.tsv") << '\n';
  return kExitOk;
}

struct DistArgs {
  std::string vanilla, oracle, out;
};

int cmd_distributions(const Common& common, const DistArgs& a) {
  const RunConfig config = config_or_default(common.config_path);
  const auto vanilla = jsonl::read_all<VanillaRunRecord>(a.vanilla);
  const auto oracle = jsonl::read_all<OracleRunRecord>(a.oracle);
  distributions::ReportOptions opts;
  opts.divergence.log_base = config.log_base;
  opts.kl_direction = config.kl_direction;
  const auto report = distributions::distribution_report(vanilla, oracle, config.language_set, opts);
  const std::string out_dir = a.out.empty() ? fs::path(a.vanilla).parent_path().string() : a.out;
  if (!out_dir.empty()) fs::create_directories(out_dir);
  tsv::write((fs::path(out_dir) / "matrix_vanilla.tsv").string(), evaluation::matrix_table(report.matrix_vanilla));
  tsv::write((fs::path(out_dir) / "matrix_oracle.tsv").string(), evaluation::matrix_table(report.matrix_oracle));
  tsv::write((fs::path(out_dir) / "divergences.tsv").string(), evaluation::divergence_table(report));
  std::cout << (fs::path(out_dir) / "divergences.tsv").string() << '\n';
  return kExitOk;
}

struct SigArgs {
  std::string baseline, treatment, out, metric = "score";
  double alpha = 0.05;
};

int cmd_significance(const SigArgs& a) {
  const auto table = evaluation::significance_table(tsv::read(a.baseline), tsv::read(a.treatment), {a.metric, a.alpha});
  // rows minus the overall row are the per-language comparisons
  const std::size_t tests = table.rows.empty() ? 0 : table.rows.size() - 1;
  std::string text = tsv::to_string(table);
  if (tests > 0) {
    text += "# bonferroni: alpha " + tsv::fixed(a.alpha, 4) + " / " + std::to_string(tests) + " = " +
            tsv::sci(a.alpha / static_cast<double>(tests), 3) + "\n";
  }
  if (a.out.empty()) {
    std::cout << text;
  } else {
    std::ofstream out(a.out, std::ios::trunc);
    if (!out) throw PreconditionError("cannot open " + a.out + " for writing");
    out << text;
  }
  return kExitOk;
}

struct LauraArgs {
  std::string queries, chunks, generators, mode = "full", stage1_eval = "group", from_utilities;
  std::optional<double> theta;
  std::optional<std::size_t> k_negatives;
  std::optional<std::uint64_t> seed;
};

int cmd_build_laura(const Common& common, const LauraArgs& a) {
  RunConfig config = load_config(common.config_path);
  if (a.theta) config.theta = *a.theta;
  if (a.k_negatives) config.k_negatives = *a.k_negatives;
  if (a.seed) config.seed = *a.seed;
  if (config.theta < 0.0 || config.theta > 1.0) throw PreconditionError("--theta must lie in [0, 1]");
  if (config.k_negatives < 1) throw PreconditionError("--k-negatives must be >= 1");

  laura::LauraOptions opts;
  opts.retrieval_top_k = config.laura_retrieval_top_k;
  opts.per_language_top_k = config.rerank_top_k;
  opts.self_training_top_k = config.rerank_top_k;
  opts.theta = config.theta;
  opts.inclusive_threshold = config.inclusive_threshold;
  opts.k_negatives = config.k_negatives;
  opts.seed = config.seed;
  opts.mode = laura::stage_from_string(a.mode);
  if (a.stage1_eval == "group") {
    opts.stage1_evaluation = laura::Stage1Evaluation::group;
  } else if (a.stage1_eval == "document") {
    opts.stage1_evaluation = laura::Stage1Evaluation::document;
  } else {
    throw PreconditionError("--stage1-eval must be group or document");
  }
  opts.prompt_template = config.prompt_template;
  opts.ngram.casefold = config.casefold;

  const auto queries = load_queries(path_or(a.queries, config, "queries"));
  const CorpusIndex corpus = load_chunks(path_or(a.chunks, config, "chunks"));
  const std::string dir = resolve_run_dir(common, config);
  RunManifest manifest = start_manifest("build-laura", config);

  laura::LauraDataset dataset;
  if (!a.from_utilities.empty()) {
    if (opts.mode != laura::Stage::full) throw PreconditionError("--from-utilities only applies to --mode full");
    dataset = laura::relabel_from_utilities(jsonl::read_all<laura::UtilityRecord>(a.from_utilities), queries,
                                            corpus, opts);
  } else {
    const ServiceSet services =
        build_services(config, split_list(a.generators), opts.mode != laura::Stage::self_training);
    dataset = laura::build_laura_dataset(queries, services, corpus, opts,
                                         effective_parallelism(config, common.parallelism));
  }

  jsonl::write_all((fs::path(dir) / "labels.jsonl").string(), dataset.labeled);
  if (opts.mode != laura::Stage::self_training && a.from_utilities.empty()) {
    jsonl::write_all((fs::path(dir) / "utilities.jsonl").string(), dataset.utilities);
  }
  jsonl::write_all((fs::path(dir) / "train.jsonl").string(), dataset.instances);
  write_json((fs::path(dir) / "statistics.json").string(), json(dataset.statistics));

  manifest.counts = json{{"queries", queries.size()},
                         {"labeled", dataset.labeled.size()},
                         {"dropped", dataset.dropped.size()},
                         {"instances", dataset.instances.size()},
                         {"mode", laura::to_string(opts.mode)},
                         {"theta", opts.theta},
                         {"k_negatives", opts.k_negatives}};
  bool failures = false;
  for (const auto& d : dataset.dropped) {
    manifest.failures.emplace_back(d.query_id, d.reason);
    if (d.reason.rfind("failed:", 0) == 0) failures = true;
  }
  finish_manifest(manifest, dir);
  std::cout << dir << '\n';
  return failures ? kExitPartial : kExitOk;
}

struct LossArgs {
  std::string instances, out;
  bool train = false;
  std::size_t epochs = 50;
  double learning_rate = 0.05;
  std::uint64_t seed = 0;
  double h = 1e-5;
};

int cmd_loss_check(const LossArgs& a) {
  const auto instances = jsonl::read_all<laura::TrainingInstance>(a.instances);
  if (instances.empty()) throw PreconditionError("no training instances in " + a.instances);
  std::vector<listwise::FeaturizedInstance> features;
  features.reserve(instances.size());
  for (const auto& inst : instances) features.push_back(listwise::featurize(inst));

  listwise::TrainOptions opts;
  opts.epochs = a.epochs;
  opts.learning_rate = a.learning_rate;
  opts.seed = a.seed;
  opts.init_scale = 0.5;
  // gradient check on the seeded initial scorer
  const auto init = listwise::train_toy_scorer(features, {0, 0.0, a.seed, opts.init_scale});
  double max_abs = 0.0;
  double max_rel = 0.0;
  double max_sum = 0.0;
  for (const auto& f : features) {
    const auto list = listwise::score_instance(init.scorer, f);
    const auto g = listwise::gradient(list);
    const auto fd = listwise::finite_difference_gradient(list, a.h);
    double diff2 = 0.0, g2 = 0.0, fd2 = 0.0, sum = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      max_abs = std::max(max_abs, std::abs(g[i] - fd[i]));
      diff2 += (g[i] - fd[i]) * (g[i] - fd[i]);
      g2 += g[i] * g[i];
      fd2 += fd[i] * fd[i];
      sum += g[i];
    }
    const double denom = std::max(std::sqrt(std::max(g2, fd2)), 1e-300);
    max_rel = std::max(max_rel, std::sqrt(diff2) / denom);
    max_sum = std::max(max_sum, std::abs(sum));
  }

  json report{{"instances", instances.size()},
              {"finite_difference_step", a.h},
              {"max_abs_gradient_error", max_abs},
              {"max_rel_gradient_error", max_rel},
              {"max_abs_gradient_sum", max_sum},
              {"initial_mean_loss", init.loss_curve.front()}};
  if (a.train) {
    const auto trained = listwise::train_toy_scorer(features, opts);
    report["loss_curve"] = trained.loss_curve;
    report["positive_first_rate"] = trained.positive_first_rate;
    report["epochs"] = a.epochs;
    report["learning_rate"] = a.learning_rate;
  }
  if (a.out.empty()) {
    std::cout << report.dump(2) << '\n';
  } else {
    write_json(a.out, report);
  }
  return kExitOk;
}

struct ServeArgs {
  std::string fixtures, host = "127.0.0.1", port_file;
  int port = 8080;
};

int cmd_mock_serve(const ServeArgs& a) {
  services::MockServer server(services::load_mock_fixtures(a.fixtures));
  g_stop = false;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  const int port = server.start(a.host, a.port);
  std::cout << "listening on " << a.host << ":" << port << std::endl;
  if (!a.port_file.empty()) {
    std::ofstream out(a.port_file + ".tmp", std::ios::trunc);
    out << port << '\n';
    out.close();
    fs::rename(a.port_file + ".tmp", a.port_file);
  }
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(50));
  server.stop();
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Multilingual RAG bias analysis and LAURA training-data toolkit", "mrag"};
  app.require_subcommand(1);
  Common common;
  std::string log_level = "warn";
  app.add_option("--log-level", log_level, "debug|info|warn|error|off")
      ->check(CLI::IsMember({"debug", "info", "warn", "error", "off"}));

  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* opt = sub->add_option("--config", common.config_path, "run configuration (JSON)");
    if (config_required) opt->required();
    sub->add_option("--run-dir", common.run_dir, "output directory (default: <output_root>/<hash>-<time>)");
    sub->add_option("--parallelism", common.parallelism, "worker count (default: CPU count)");
  };

  ChunkArgs chunk;
  auto* s_chunk = app.add_subcommand("chunk", "split raw documents into retrieval chunks");
  add_common(s_chunk, false);
  s_chunk->add_option("--input", chunk.input, "RawDocument JSONL");
  s_chunk->add_option("--output", chunk.output, "DocumentChunk JSONL");

  RunArgs vanilla_args;
  auto* s_vanilla = app.add_subcommand("run-vanilla", "retrieve, rerank globally, generate");
  add_common(s_vanilla, true);
  s_vanilla->add_option("--queries", vanilla_args.queries);
  s_vanilla->add_option("--chunks", vanilla_args.chunks);
  s_vanilla->add_option("--generators", vanilla_args.generators, "comma-separated generator ids");

  RunArgs oracle_args;
  auto* s_oracle = app.add_subcommand("run-oracle", "per-language rerank and generation, best group per query");
  add_common(s_oracle, true);
  s_oracle->add_option("--queries", oracle_args.queries);
  s_oracle->add_option("--chunks", oracle_args.chunks);
  s_oracle->add_option("--generators", oracle_args.generators, "comma-separated generator ids");

  EvalArgs eval;
  auto* s_eval = app.add_subcommand("eval", "per-query and per-language metric tables");
  s_eval->add_option("--run", eval.run, "vanilla or oracle run JSONL")->required();
  s_eval->add_option("--judgments", eval.judgments, "relevance judgments JSONL");
  s_eval->add_option("--chunks", eval.chunks, "chunk JSONL (chunk languages for PEER)");
  s_eval->add_option("--k", eval.k, "cutoff for Precision@k / NDCG@k")->check(CLI::PositiveNumber);
  s_eval->add_option("--out", eval.out, "output directory (default: next to the run)");
  s_eval->add_option("--prefix", eval.prefix, "output file prefix (default: run kind)");

  DistArgs dist;
  auto* s_dist = app.add_subcommand("distributions", "language distribution matrices and JS/KL/entropy");
  add_common(s_dist, false);
  s_dist->add_option("--vanilla", dist.vanilla)->required();
  s_dist->add_option("--oracle", dist.oracle)->required();
  s_dist->add_option("--out", dist.out, "output directory (default: next to the vanilla run)");

  LauraArgs laura_args;
  auto* s_laura = app.add_subcommand("build-laura", "construct LAURA labels and listwise training instances");
  add_common(s_laura, true);
  s_laura->add_option("--queries", laura_args.queries);
  s_laura->add_option("--chunks", laura_args.chunks);
  s_laura->add_option("--generators", laura_args.generators, "comma-separated generator ids");
  s_laura->add_option("--theta", laura_args.theta, "utility threshold (default 0.8)");
  s_laura->add_option("--k-negatives", laura_args.k_negatives, "negatives per instance");
  s_laura->add_option("--mode", laura_args.mode)->check(CLI::IsMember({"full", "stage1-only", "self-training"}));
  s_laura->add_option("--stage1-eval", laura_args.stage1_eval)->check(CLI::IsMember({"group", "document"}));
  s_laura->add_option("--seed", laura_args.seed);
  s_laura->add_option("--from-utilities", laura_args.from_utilities, "re-threshold a persisted utilities.jsonl");

  SigArgs sig;
  auto* s_sig = app.add_subcommand("significance", "per-language paired t-tests between two score tables");
  s_sig->add_option("--baseline", sig.baseline)->required();
  s_sig->add_option("--treatment", sig.treatment)->required();
  s_sig->add_option("--metric", sig.metric, "column to compare (default: score)");
  s_sig->add_option("--alpha", sig.alpha);
  s_sig->add_option("--out", sig.out, "output TSV (default: stdout)");

  LossArgs loss;
  auto* s_loss = app.add_subcommand("loss-check", "gradient verification and toy listwise training");
  s_loss->add_option("--instances", loss.instances, "training instance JSONL")->required();
  s_loss->add_flag("--train", loss.train, "also train the toy scorer");
  s_loss->add_option("--epochs", loss.epochs);
  s_loss->add_option("--lr", loss.learning_rate);
  s_loss->add_option("--seed", loss.seed);
  s_loss->add_option("--fd-step", loss.h, "finite-difference step");
  s_loss->add_option("--out", loss.out, "report JSON (default: stdout)");

  ServeArgs serve;
  auto* s_serve = app.add_subcommand("mock-serve", "host the deterministic mock services over HTTP");
  s_serve->add_option("--fixtures", serve.fixtures)->required();
  s_serve->add_option("--port", serve.port, "0 picks a free port");
  s_serve->add_option("--host", serve.host);
  s_serve->add_option("--port-file", serve.port_file, "write the bound port here once listening");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    std::cerr << "mrag: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  static const std::map<std::string, log::Level> levels = {{"debug", log::Level::debug},
                                                           {"info", log::Level::info},
                                                           {"warn", log::Level::warn},
                                                           {"error", log::Level::error},
                                                           {"off", log::Level::off}};
  log::set_level(levels.at(log_level));

  try {
    if (s_chunk->parsed()) return cmd_chunk(common, chunk);
    if (s_vanilla->parsed()) return cmd_run(RunKind::vanilla, common, vanilla_args);
    if (s_oracle->parsed()) return cmd_run(RunKind::oracle, common, oracle_args);
    if (s_eval->parsed()) return cmd_eval(eval);
    if (s_dist->parsed()) return cmd_distributions(common, dist);
    if (s_laura->parsed()) return cmd_build_laura(common, laura_args);
    if (s_sig->parsed()) return cmd_significance(sig);
    if (s_loss->parsed()) return cmd_loss_check(loss);
    if (s_serve->parsed()) return cmd_mock_serve(serve);
  } catch (const Error& e) {
    std::cerr << "mrag: " << e.what() << '\n';
    return kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "mrag: " << e.what() << '\n';
    return kExitFailure;
  }
  std::cerr << app.help();
  return kExitUsage;
}

}  // namespace mrag::cli
