// seqgraph command-line tool: synthetic data generation, training,
// prediction, evaluation, disconnected-reasoning probes, and graph debugging.

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "seqgraph/eval.hpp"
#include "seqgraph/graph.hpp"
#include "seqgraph/net.hpp"
#include "seqgraph/train.hpp"

namespace {

using namespace seqgraph;

constexpr int kExitUsage = 2;
constexpr int kExitValidation = 3;
constexpr int kExitNumeric = 4;

DatasetStyle style_from_name(const std::string& name) {
  if (name == "hotpot") return DatasetStyle::Hotpot;
  if (name == "musique") return DatasetStyle::Musique;
  throw ConfigError("style: expected 'hotpot' or 'musique', got '" + name + "'");
}

// Every run records the exact configuration it resolved to (defaults plus
// config file plus flags) next to its primary output.
void write_resolved_config(const CLI::App* cmd, const std::string& out_path) {
  std::ofstream f(out_path + ".config");
  f << cmd->config_to_str(true, false);
}

// Entity spans travel in a sidecar file next to the dataset; pick it up
// automatically when present.
std::string sidecar_path(const std::string& dataset_path) {
  return dataset_path + ".entities.json";
}

std::vector<QuestionInstance> load_with_sidecar(const std::string& path,
                                                const std::string& style) {
  auto data = load_dataset(path, style_from_name(style));
  if (std::ifstream(sidecar_path(path)).good()) load_sidecar(sidecar_path(path), data);
  return data;
}

std::vector<EncodedSequence> encode_instance(const QuestionInstance& inst,
                                             const LocalGraph& graph, const Vocabulary& vocab,
                                             int max_len) {
  std::vector<EncodedSequence> seqs;
  for (int pi = 0; pi < static_cast<int>(inst.passages.size()); ++pi)
    seqs.push_back(assemble_input(inst.question, inst, pi, graph, vocab, max_len));
  return seqs;
}

// ---------------------------------------------------------------------------

void add_gen(CLI::App& app) {
  auto cmd = app.add_subcommand("gen", "Generate a synthetic multi-hop dataset");
  auto cfg = std::make_shared<SyntheticConfig>();
  auto out = std::make_shared<std::string>("dataset.json");
  auto style = std::make_shared<std::string>("hotpot");
  auto hops = std::make_shared<int>(0);
  cmd->add_option("--n", cfg->num_questions, "number of questions")->capture_default_str();
  cmd->add_option("--hops", *hops, "fixed hop count (sets both min and max)");
  cmd->add_option("--min-hops", cfg->min_hops, "minimum hops")->capture_default_str();
  cmd->add_option("--max-hops", cfg->max_hops, "maximum hops")->capture_default_str();
  cmd->add_option("--passages", cfg->passages_per_question, "passages per question")
      ->capture_default_str();
  cmd->add_option("--vocab", cfg->vocab_size, "filler word pool size")->capture_default_str();
  cmd->add_option("--entities", cfg->entity_pool_size, "entity pool size")
      ->capture_default_str();
  cmd->add_option("--shortcut-rate", cfg->shortcut_rate,
                  "fraction of questions with the answer leaked into the first-hop passage")
      ->capture_default_str();
  cmd->add_option("--seed", cfg->seed, "generator seed")->capture_default_str();
  cmd->add_option("--style", *style, "annotation style: hotpot|musique")->capture_default_str();
  cmd->add_option("--out", *out, "output dataset path")->capture_default_str();
  cmd->callback([cmd, cfg, out, style, hops] {
    if (*hops > 0) cfg->min_hops = cfg->max_hops = *hops;
    cfg->style = style_from_name(*style);
    auto data = generate_synthetic(*cfg);
    save_dataset(*out, data);
    save_sidecar(sidecar_path(*out), data);
    write_resolved_config(cmd, *out);
    std::cout << "wrote " << cfg->num_questions << " instances to " << *out << "\n";
  });
}

void add_train(CLI::App& app) {
  auto cmd = app.add_subcommand("train", "Train a model on a dataset");
  struct Args {
    std::string data, out = "model.ckpt", log_path, mode = "seqgraph", variant = "hotpot",
                style = "hotpot";
    ModelConfig model;
    GnnConfig gnn;
    TrainConfig train;
  };
  auto a = std::make_shared<Args>();
  cmd->add_option("--data", a->data, "training dataset")->required();
  cmd->add_option("--style", a->style, "dataset annotation style: hotpot|musique")
      ->capture_default_str();
  cmd->add_option("--out", a->out, "checkpoint output path")->capture_default_str();
  cmd->add_option("--log", a->log_path, "JSONL step log path");
  cmd->add_option("--mode", a->mode, "fid|pathfid|seqgraph")->capture_default_str();
  cmd->add_option("--variant", a->variant, "path variant: hotpot|da|sa|sia|dsia")
      ->capture_default_str();
  cmd->add_option("--d-model", a->model.d_model)->capture_default_str();
  cmd->add_option("--enc-layers", a->model.enc_layers)->capture_default_str();
  cmd->add_option("--dec-layers", a->model.dec_layers)->capture_default_str();
  cmd->add_option("--heads", a->model.heads)->capture_default_str();
  cmd->add_option("--d-ff", a->model.d_ff)->capture_default_str();
  cmd->add_option("--fusion-layer", a->model.fusion_layer, "encoder layers before fusion")
      ->capture_default_str();
  cmd->add_option("--dropout", a->model.dropout)->capture_default_str();
  cmd->add_option("--max-positions", a->model.max_positions)->capture_default_str();
  cmd->add_option("--max-out-len", a->model.max_out_len)->capture_default_str();
  cmd->add_option("--gat-layers", a->gnn.layers)->capture_default_str();
  cmd->add_option("--gat-heads", a->gnn.heads)->capture_default_str();
  cmd->add_option("--gat-dropout", a->gnn.dropout)->capture_default_str();
  cmd->add_option("--lr", a->train.learning_rate)->capture_default_str();
  cmd->add_option("--warmup", a->train.warmup_steps)->capture_default_str();
  cmd->add_option("--steps", a->train.total_steps)->capture_default_str();
  cmd->add_option("--batch", a->train.effective_batch_size)->capture_default_str();
  cmd->add_option("--clip", a->train.grad_clip_norm)->capture_default_str();
  cmd->add_option("--weight-decay", a->train.weight_decay)->capture_default_str();
  cmd->add_option("--seed", a->train.seed)->capture_default_str();
  cmd->add_option("--log-every", a->train.log_every)->capture_default_str();
  cmd->add_option("--checkpoint-every", a->train.checkpoint_every)->capture_default_str();
  cmd->callback([cmd, a] {
    auto data = load_with_sidecar(a->data, a->style);
    Vocabulary vocab = Vocabulary::build(data, CodecConfig{});
    a->model.vocab_size = vocab.size();
    ModelMode mode = mode_from_name(a->mode);
    QaModel model(a->model, a->gnn, mode, a->train.seed);
    auto examples = make_examples(data, vocab, mode, variant_from_name(a->variant),
                                  a->model.max_positions, a->model.max_out_len);
    std::ofstream log_file;
    std::ostream* log_stream = nullptr;
    if (!a->log_path.empty()) {
      log_file.open(a->log_path);
      log_stream = &log_file;
    }
    TrainLog log = fit(model, vocab, examples, a->train, log_stream, a->out);
    model.save(a->out, vocab);
    write_resolved_config(cmd, a->out);
    std::cout << "trained " << a->train.total_steps << " steps; final loss "
              << (log.steps.empty() ? 0.0 : log.steps.back().loss) << "; checkpoint " << a->out
              << "\n";
  });
}

void add_predict(CLI::App& app) {
  auto cmd = app.add_subcommand("predict", "Run a trained model over a dataset");
  struct Args {
    std::string model, data, out = "predictions.jsonl", style = "hotpot";
    int beam = 1;
  };
  auto a = std::make_shared<Args>();
  cmd->add_option("--model", a->model, "checkpoint path")->required();
  cmd->add_option("--data", a->data, "dataset to predict on")->required();
  cmd->add_option("--style", a->style, "dataset annotation style: hotpot|musique")
      ->capture_default_str();
  cmd->add_option("--out", a->out, "predictions output path (JSONL)")->capture_default_str();
  cmd->add_option("--beam", a->beam, "beam width (1 = greedy)")->capture_default_str();
  cmd->callback([cmd, a] {
    QaModel::Loaded loaded = QaModel::load(a->model);
    const ModelConfig& cfg = loaded.model->config();
    auto data = load_with_sidecar(a->data, a->style);
    std::vector<std::pair<std::string, std::string>> outputs;
    for (const auto& inst : data) {
      LocalGraph graph = build_local_graph(inst);
      auto seqs = encode_instance(inst, graph, loaded.vocab, cfg.max_positions);
      auto ids = loaded.model->predict(seqs, &graph, cfg.max_out_len,
                                       a->beam > 1 ? DecodeStrategy::Beam : DecodeStrategy::Greedy,
                                       a->beam);
      outputs.emplace_back(inst.id, loaded.vocab.decode(ids));
    }
    write_predictions(a->out, outputs);
    write_resolved_config(cmd, a->out);
    std::cout << "wrote " << outputs.size() << " predictions to " << a->out << "\n";
  });
}

void add_eval(CLI::App& app) {
  auto cmd = app.add_subcommand("eval", "Score predictions against gold annotations");
  struct Args {
    std::string pred, data, out, csv, style = "hotpot", variant = "hotpot";
  };
  auto a = std::make_shared<Args>();
  cmd->add_option("--pred", a->pred, "predictions file (JSONL)")->required();
  cmd->add_option("--data", a->data, "gold dataset")->required();
  cmd->add_option("--style", a->style, "dataset annotation style: hotpot|musique")
      ->capture_default_str();
  cmd->add_option("--variant", a->variant, "path variant the predictions use")
      ->capture_default_str();
  cmd->add_option("--out", a->out, "write the JSON report here instead of stdout");
  cmd->add_option("--faithfulness-csv", a->csv, "also write the faithfulness table as CSV");
  cmd->callback([cmd, a] {
    auto data = load_with_sidecar(a->data, a->style);
    auto preds = read_predictions(a->pred, variant_from_name(a->variant));
    EvalReport report = evaluate(preds, data);
    if (a->out.empty()) {
      std::cout << report.to_json() << "\n";
    } else {
      std::ofstream(a->out) << report.to_json() << "\n";
      write_resolved_config(cmd, a->out);
      std::cout << "wrote report to " << a->out << "\n";
    }
    if (!a->csv.empty()) std::ofstream(a->csv) << report.faithfulness_csv();
  });
}

void add_probe(CLI::App& app) {
  auto cmd = app.add_subcommand(
      "probe", "Build reduced-context probes from a 2-hop dataset, or score them");
  struct Args {
    std::string data, out = "probes.json", pred, style = "hotpot", variant = "hotpot";
  };
  auto a = std::make_shared<Args>();
  cmd->add_option("--data", a->data, "2-hop dataset (originals for build, probes for scoring)")
      ->required();
  cmd->add_option("--style", a->style, "dataset annotation style: hotpot|musique")
      ->capture_default_str();
  cmd->add_option("--out", a->out, "probe dataset output path")->capture_default_str();
  cmd->add_option("--pred", a->pred,
                  "predictions over an existing probe set; prints the cheating-rate block "
                  "instead of building probes");
  cmd->add_option("--variant", a->variant, "path variant the predictions use")
      ->capture_default_str();
  cmd->callback([cmd, a] {
    auto data = load_with_sidecar(a->data, a->style);
    if (!a->pred.empty()) {
      auto preds = read_predictions(a->pred, variant_from_name(a->variant));
      DireBlock block = dire_scores(preds, data);
      std::cout << "{\"answer\": " << block.answer << ", \"supp_p\": " << block.supp_p
                << ", \"supp_s\": " << block.supp_s << ", \"ans_supp_p\": " << block.ans_supp_p
                << ", \"ans_supp_s\": " << block.ans_supp_s
                << ", \"originals\": " << block.originals << "}\n";
      return;
    }
    std::vector<std::string> skipped;
    auto probes = build_dire_probe(data, &skipped);
    for (const auto& id : skipped)
      std::cerr << "skipped " << id << ": not a 2-support instance\n";
    save_dataset(a->out, probes);
    save_sidecar(sidecar_path(a->out), probes);
    write_resolved_config(cmd, a->out);
    std::cout << "wrote " << probes.size() << " probes to " << a->out << "\n";
  });
}

void add_graph_dump(CLI::App& app) {
  auto cmd = app.add_subcommand("graph-dump", "Print entity-passage graph edge lists");
  struct Args {
    std::string data, id, style = "hotpot";
  };
  auto a = std::make_shared<Args>();
  cmd->add_option("--data", a->data, "dataset")->required();
  cmd->add_option("--style", a->style, "dataset annotation style: hotpot|musique")
      ->capture_default_str();
  cmd->add_option("--id", a->id, "dump a single instance (default: all)");
  cmd->callback([a] {
    auto data = load_with_sidecar(a->data, a->style);
    bool found = false;
    for (const auto& inst : data) {
      if (!a->id.empty() && inst.id != a->id) continue;
      found = true;
      std::cout << "# " << inst.id << "\n" << dump_edge_list(build_local_graph(inst));
    }
    if (!a->id.empty() && !found) throw ValidationError("no instance with id '" + a->id + "'");
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-hop QA over local entity-passage graphs"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value config file; command-line flags override it");
  add_gen(app);
  add_train(app);
  add_predict(app);
  add_eval(app);
  add_probe(app);
  add_graph_dump(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  } catch (const seqgraph::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::runtime_error& e) {
    // config, validation, parse, and codec errors all carry a named-field message
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return 0;
}
