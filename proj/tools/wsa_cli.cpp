#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "wsa/bench.hpp"
#include "wsa/remote.hpp"
#include "wsa/synthetic.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitUnreachable = 3;
constexpr int kExitBudget = 4;

std::string infer_format(const std::string& path, const std::string& given) {
  if (!given.empty()) return given;
  return path.size() > 4 && path.substr(path.size() - 4) == ".csv" ? "csv"
                                                                   : "jsonl";
}

struct TargetHandle {
  std::unique_ptr<wsa::TargetModel> owned;
  const wsa::TargetModel* model = nullptr;
};

TargetHandle open_target(const std::string& spec) {
  TargetHandle h;
  if (spec.rfind("http://", 0) == 0 || spec.rfind("https://", 0) == 0) {
    h.owned = std::make_unique<wsa::RemoteTarget>(spec);
  } else {
    h.owned = std::make_unique<wsa::LocalTextClassifier>(
        wsa::LocalTextClassifier::load(spec));
  }
  h.model = h.owned.get();
  return h;
}

struct AttackArgs {
  std::string data, format, target, glove, counter, out, ledger_out, trace_dir;
  wsa::AttackConfig cfg;
  std::size_t sample = 1000;
  std::uint64_t sample_seed = 0;
  std::string surrogate_mode = "embedding";
  long min_train = 50;
};

void add_attack_options(CLI::App* cmd, AttackArgs& a, bool with_strategies) {
  cmd->add_option("--data", a.data, "dataset file")->required();
  cmd->add_option("--format", a.format, "csv|jsonl (default: by extension)");
  cmd->add_option("--target", a.target, "model.json path or http:// endpoint")
      ->required();
  cmd->add_option("--glove", a.glove, "ranking-encoding vectors (defaults to --counter)");
  cmd->add_option("--counter", a.counter, "counter-fitted vectors")->required();
  cmd->add_option("--method", a.cfg.method, "greedy|genetic");
  if (with_strategies) {
    cmd->add_flag("--rank-strategy", a.cfg.use_rank_strategy,
                  "learned word-importance ranking");
    cmd->add_flag("--replace-strategy", a.cfg.use_replace_strategy,
                  "moving-direction synonym filter");
  }
  cmd->add_option("--n", a.cfg.n_neighbors, "nearest neighbors per word");
  cmd->add_option("--k", a.cfg.k_direction, "direction-filtered candidates");
  cmd->add_option("--pop", a.cfg.population_size, "genetic population size");
  cmd->add_option("--max-gen", a.cfg.max_generations, "genetic generation cap");
  cmd->add_option("--mutation-rate", a.cfg.mutation_rate, "genetic mutation rate");
  cmd->add_option("--budget", a.cfg.max_queries_per_doc, "query budget per document");
  cmd->add_option("--min-cos", a.cfg.min_synonym_cosine, "synonym cosine gate");
  cmd->add_option("--sample", a.sample, "documents to sample");
  cmd->add_option("--seed", a.sample_seed, "sampling / attack seed");
  cmd->add_option("--surrogate-mode", a.surrogate_mode, "embedding|bag-of-words");
  cmd->add_option("--min-train", a.min_train, "surrogate training threshold");
}

struct LoadedExperiment {
  std::vector<wsa::LabeledDocument> docs;
  wsa::EmbeddingStore counter, glove;
  TargetHandle target;
  wsa::ExperimentSetup setup;
};

LoadedExperiment load_experiment(AttackArgs& a) {
  LoadedExperiment e;
  e.docs = wsa::load_dataset(a.data, infer_format(a.data, a.format));
  e.counter = wsa::load_embeddings(a.counter, {}, {true, "counter-fitted"});
  e.glove = a.glove.empty()
                ? e.counter
                : wsa::load_embeddings(a.glove, {}, {true, "glove"});
  e.target = open_target(a.target);
  a.cfg.seed = a.sample_seed;
  e.setup.counter = &e.counter;
  e.setup.encoder = &e.glove;
  e.setup.surrogate.mode = wsa::encoding_mode_from_string(a.surrogate_mode);
  e.setup.surrogate.min_train = a.min_train;
  return e;
}

void write_traces(const wsa::ExperimentOutput& out, const std::string& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& [doc_id, trace] : out.traces) {
    std::ofstream f(dir + "/" + doc_id + ".jsonl", std::ios::binary);
    for (const auto& step : trace) f << step.to_json().dump() << '\n';
  }
}

int finish_run(const wsa::MetricsReport& report) {
  if (report.partial) {
    std::cerr << "error: target became unreachable, report is partial\n";
    return kExitUnreachable;
  }
  if (report.attacked > 0 && report.budget_aborted == report.attacked) {
    std::cerr << "error: every attacked document hit the query budget\n";
    return kExitBudget;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"word-substitute black-box attack toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "", "flat key=value config file; flags override");
  app.allow_config_extras(true);

  // train-target
  auto* train = app.add_subcommand("train-target", "train the local classifier");
  std::string t_data, t_format, t_out;
  wsa::TargetTrainConfig t_cfg;
  train->add_option("--data", t_data)->required();
  train->add_option("--format", t_format, "csv|jsonl");
  train->add_option("--out", t_out)->required();
  train->add_option("--seed", t_cfg.seed);
  train->add_option("--epochs", t_cfg.epochs);
  train->add_option("--lr", t_cfg.learning_rate);

  // attack
  auto* attack = app.add_subcommand("attack", "run one attack configuration");
  AttackArgs a_args;
  std::string a_out, a_ledger, a_trace;
  add_attack_options(attack, a_args, true);
  attack->add_option("--out", a_out, "report JSON path")->required();
  attack->add_option("--ledger", a_ledger, "ledger JSONL output");
  attack->add_option("--trace", a_trace, "per-document trace directory");

  // ablate
  auto* ablate = app.add_subcommand("ablate", "run the four strategy modes");
  AttackArgs b_args;
  std::string b_out;
  add_attack_options(ablate, b_args, false);
  ablate->add_option("--out", b_out, "output directory")->required();

  // report
  auto* report = app.add_subcommand("report", "render a saved report");
  std::string r_in, r_format = "table";
  report->add_option("--in", r_in)->required();
  report->add_option("--format", r_format, "csv|table");

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "emit a synthetic sentiment corpus");
  wsa::SyntheticConfig g_cfg;
  std::string g_data, g_vectors;
  gen->add_option("--out-data", g_data, "dataset JSONL path")->required();
  gen->add_option("--out-vectors", g_vectors, "vector file path")->required();
  gen->add_option("--docs", g_cfg.documents);
  gen->add_option("--seed", g_cfg.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : kExitInput;
  }

  try {
    if (*train) {
      wsa::DatasetSummary summary;
      auto docs = wsa::load_dataset(t_data, infer_format(t_data, t_format), &summary);
      std::printf("dataset: %zu documents, %d classes, avg length %.1f tokens\n",
                  summary.documents, summary.classes, summary.avg_tokens);
      auto model = wsa::train_local_target(docs, t_cfg);
      model.save(t_out);
      std::printf("training accuracy: %.4f\nmodel written to %s\n",
                  model.training_accuracy(), t_out.c_str());
      return kExitOk;
    }

    if (*attack) {
      auto e = load_experiment(a_args);
      e.setup.collect_traces = !a_trace.empty();
      auto out = wsa::run_experiment(e.docs, *e.target.model, a_args.cfg,
                                     e.setup, a_args.sample, a_args.sample_seed);
      wsa::emit_report(out.report, a_out, "json");
      if (!a_ledger.empty()) out.ledger.persist(a_ledger);
      if (!a_trace.empty()) write_traces(out, a_trace);
      std::fputs(wsa::render_table({{a_args.cfg.method, out.report}}).c_str(),
                 stdout);
      return finish_run(out.report);
    }

    if (*ablate) {
      auto e = load_experiment(b_args);
      auto out = wsa::run_ablation(e.docs, *e.target.model, b_args.cfg, e.setup,
                                   b_args.sample, b_args.sample_seed);
      std::filesystem::create_directories(b_out);
      const std::map<std::string, std::string> files = {
          {"baseline", "baseline"},
          {"+WRankS", "wranks"},
          {"+WRepS", "wreps"},
          {"+both", "both"}};
      std::vector<std::pair<std::string, wsa::MetricsReport>> table;
      int rc = kExitOk;
      for (const auto& [name, run] : out.runs) {
        wsa::emit_report(run.report, b_out + "/" + files.at(name) + ".json",
                         "json");
        run.ledger.persist(b_out + "/" + files.at(name) + ".ledger.jsonl");
        table.emplace_back(name, run.report);
        int this_rc = finish_run(run.report);
        if (this_rc != kExitOk) rc = this_rc;
      }
      std::fputs(wsa::render_table(table).c_str(), stdout);
      return rc;
    }

    if (*report) {
      auto rep = wsa::load_report(r_in);
      if (r_format == "csv") {
        std::printf(
            "original_accuracy,after_attack_accuracy,perturbation_rate_mean,"
            "avg_queries,sampled,attacked,skipped,successes\n");
        std::printf("%g,%g,%g,%g,%ld,%ld,%ld,%ld\n", rep.original_accuracy,
                    rep.after_attack_accuracy, rep.perturbation_rate_mean,
                    rep.avg_queries, rep.sampled, rep.attacked, rep.skipped,
                    rep.successes);
      } else if (r_format == "table") {
        std::fputs(wsa::render_table({{"attack", rep}}).c_str(), stdout);
      } else {
        throw wsa::domain_error("unknown report format: " + r_format);
      }
      return kExitOk;
    }

    if (*gen) {
      auto data = wsa::make_synthetic_sentiment(g_cfg);
      wsa::save_dataset_jsonl(data.docs, g_data);
      wsa::save_embeddings(data.vectors, g_vectors);
      std::printf("wrote %zu documents and %zu vectors\n", data.docs.size(),
                  data.vectors.size());
      return kExitOk;
    }
  } catch (const wsa::query_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUnreachable;
  } catch (const wsa::error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  }
  return kExitOk;
}
