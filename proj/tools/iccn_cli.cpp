// Command-line front end: synthesize datasets, train the interaction
// network and its ablation variants, run CCA-family baselines, grid-search
// hyperparameters, and export training curves.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "iccn/baselines.hpp"
#include "iccn/checkpoint.hpp"
#include "iccn/data.hpp"
#include "iccn/downstream.hpp"
#include "iccn/iccn.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace iccn;

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void atomic_write(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot open '" + tmp.string() + "' for writing");
    os << content;
    if (!os) throw DataError("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

// ---------------------------------------------------------------------------
// config serialization
// ---------------------------------------------------------------------------

json to_json(const nn::Conv2dBlockSpec& spec) {
  json stages = json::array();
  for (const auto& st : spec.stages) {
    stages.push_back({{"out_channels", st.out_channels},
                      {"kernel", st.kernel},
                      {"pool", st.pool}});
  }
  return {{"stages", stages}, {"embed_dim", spec.embed_dim}};
}

nn::Conv2dBlockSpec conv2d_from_json(const json& j) {
  nn::Conv2dBlockSpec spec;
  spec.stages.clear();
  for (const auto& st : j.at("stages")) {
    spec.stages.push_back({st.at("out_channels").get<std::size_t>(),
                           st.at("kernel").get<std::size_t>(),
                           st.at("pool").get<bool>()});
  }
  spec.embed_dim = j.at("embed_dim").get<std::size_t>();
  return spec;
}

json to_json(const IccnConfig& cfg) {
  return {{"d_t", cfg.d_t},
          {"d_a", cfg.d_a},
          {"d_v", cfg.d_v},
          {"conv1d_audio", {{"kernel", cfg.conv1d_audio.kernel},
                            {"out_channels", cfg.conv1d_audio.out_channels}}},
          {"conv1d_video", {{"kernel", cfg.conv1d_video.kernel},
                            {"out_channels", cfg.conv1d_video.out_channels}}},
          {"lstm_hidden_audio", cfg.lstm_hidden_audio},
          {"lstm_hidden_video", cfg.lstm_hidden_video},
          {"conv2d", to_json(cfg.conv2d)},
          {"no_text_hidden", cfg.no_text_hidden},
          {"loss", {{"out_dim", cfg.loss.out_dim},
                    {"eps", cfg.loss.eps},
                    {"sv_floor", cfg.loss.sv_floor}}},
          {"lr", cfg.lr},
          {"batch", cfg.batch},
          {"epochs", cfg.epochs},
          {"seed", cfg.seed},
          {"variant", variant_name(cfg.variant)}};
}

IccnConfig iccn_from_json(const json& j) {
  IccnConfig cfg;
  cfg.d_t = j.at("d_t").get<std::size_t>();
  cfg.d_a = j.at("d_a").get<std::size_t>();
  cfg.d_v = j.at("d_v").get<std::size_t>();
  cfg.conv1d_audio = {j.at("conv1d_audio").at("kernel").get<std::size_t>(),
                      j.at("conv1d_audio").at("out_channels").get<std::size_t>()};
  cfg.conv1d_video = {j.at("conv1d_video").at("kernel").get<std::size_t>(),
                      j.at("conv1d_video").at("out_channels").get<std::size_t>()};
  cfg.lstm_hidden_audio = j.at("lstm_hidden_audio").get<std::size_t>();
  cfg.lstm_hidden_video = j.at("lstm_hidden_video").get<std::size_t>();
  cfg.conv2d = conv2d_from_json(j.at("conv2d"));
  cfg.no_text_hidden = j.at("no_text_hidden").get<std::vector<std::size_t>>();
  cfg.loss.out_dim = j.at("loss").at("out_dim").get<std::size_t>();
  cfg.loss.eps = j.at("loss").at("eps").get<double>();
  cfg.loss.sv_floor = j.at("loss").at("sv_floor").get<double>();
  cfg.lr = j.at("lr").get<double>();
  cfg.batch = j.at("batch").get<std::size_t>();
  cfg.epochs = j.at("epochs").get<std::size_t>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.variant = parse_variant(j.at("variant").get<std::string>());
  return cfg;
}

json to_json(const SyntheticSpec& spec) {
  return {{"latent_dim", spec.latent_dim},
          {"text_latent_dim", spec.text_latent_dim},
          {"nuisance_dim", spec.nuisance_dim},
          {"nuisance_scale", spec.nuisance_scale},
          {"d_t", spec.d_t},
          {"d_a", spec.d_a},
          {"d_v", spec.d_v},
          {"l_a", spec.l_a},
          {"l_v", spec.l_v},
          {"noise_text", spec.noise_text},
          {"noise_audio", spec.noise_audio},
          {"noise_video", spec.noise_video},
          {"nonlinear", spec.nonlinear},
          {"n_train", spec.n_train},
          {"n_val", spec.n_val},
          {"n_test", spec.n_test},
          {"seed", spec.seed},
          {"task", task_name(spec.task)}};
}

json to_json(const MlpHyper& hyper) {
  return {{"hidden", hyper.hidden},
          {"lr", hyper.lr},
          {"batch", hyper.batch},
          {"epochs", hyper.epochs},
          {"seed", hyper.seed}};
}

// ---------------------------------------------------------------------------
// presets and shared plumbing
// ---------------------------------------------------------------------------

SyntheticSpec preset_spec(const std::string& name) {
  SyntheticSpec spec;  // toy counts by default
  if (name == "toy") {
    return spec;
  }
  if (name == "mosi-like") {
    spec.n_train = 1283;
    spec.n_val = 229;
    spec.n_test = 686;
    return spec;
  }
  if (name == "mosei-like") {
    spec.n_train = 16326;
    spec.n_val = 1871;
    spec.n_test = 4659;
    return spec;
  }
  if (name == "iemocap-like") {
    spec.n_train = 2717;
    spec.n_val = 789;
    spec.n_test = 938;
    spec.task = Task::emotion4;
    return spec;
  }
  throw ConfigError("unknown preset '" + name +
                    "' (expected mosi-like, mosei-like, iemocap-like, toy)");
}

Splits resolve_splits(const Dataset& data, const std::string& fracs,
                      std::uint64_t seed) {
  if (!fracs.empty()) {
    std::array<double, 3> f{};
    if (std::sscanf(fracs.c_str(), "%lf,%lf,%lf", &f[0], &f[1], &f[2]) != 3) {
      throw ConfigError("--split-fracs expects three comma-separated values");
    }
    return split(data, f, seed);
  }
  return split_by_prefix(data);
}

std::string curve_csv(const TrainingCurve& curve) {
  std::ostringstream os;
  os << "epoch,loss,mean_canonical_correlation,mean_cosine_similarity\n";
  for (const CurvePoint& p : curve) {
    os << p.epoch << ',' << fmt17(p.loss) << ','
       << fmt17(p.mean_canonical_correlation) << ','
       << fmt17(p.mean_cosine_similarity) << '\n';
  }
  return os.str();
}

std::string metrics_text(const MetricsReport& rep) {
  std::ostringstream os;
  os << "acc2=" << fmt17(rep.acc2) << '\n'
     << "f_score=" << fmt17(rep.f_score) << '\n'
     << "mae=" << fmt17(rep.mae) << '\n'
     << "acc7=" << fmt17(rep.acc7) << '\n'
     << "corr=" << fmt17(rep.pearson) << '\n'
     << "n_excluded=" << rep.n_excluded << '\n';
  if (rep.pearson_degenerate) os << "corr_degenerate=1\n";
  return os.str();
}

std::string metrics_text(const EmotionMetrics& rep) {
  std::ostringstream os;
  for (std::size_t e = 0; e < kEmotionCount; ++e) {
    os << "acc2_" << kEmotionNames[e] << '=' << fmt17(rep.acc2[e]) << '\n'
       << "f_score_" << kEmotionNames[e] << '=' << fmt17(rep.f_score[e])
       << '\n';
  }
  os << "n_excluded=0\n";
  return os.str();
}

struct EvalOutcome {
  std::string text;      // metrics key=value block
  double val_mae = 0.0;  // selection metrics on the validation split
  double val_f = 0.0;
};

/// Trains the downstream MLP on train embeddings, selects on val, reports
/// test metrics.
EvalOutcome run_downstream(const Dataset& data, const Splits& s,
                           const Tensor& x_train, const Tensor& x_val,
                           const Tensor& x_test, const MlpHyper& hyper) {
  DownstreamModel mlp(data.task, x_train.cols(), hyper);
  mlp.fit(x_train, label_matrix(data, s.train), x_val,
          label_matrix(data, s.val));
  EvalOutcome out;
  if (data.task == Task::sentiment) {
    std::vector<double> val_labels, test_labels;
    for (std::size_t i : s.val) val_labels.push_back(data.records[i].label);
    for (std::size_t i : s.test) test_labels.push_back(data.records[i].label);
    MetricsReport val_rep = evaluate(mlp.predict(x_val), val_labels);
    MetricsReport test_rep = evaluate(mlp.predict(x_test), test_labels);
    out.text = metrics_text(test_rep);
    out.val_mae = val_rep.mae;
    out.val_f = val_rep.f_score;
  } else {
    auto labels_of = [&](const std::vector<std::size_t>& idx) {
      std::vector<std::vector<double>> out_labels;
      for (std::size_t i : idx) out_labels.push_back(data.records[i].emotion_labels);
      return out_labels;
    };
    EmotionMetrics val_rep =
        evaluate_emotion(mlp.predict_emotion(x_val), labels_of(s.val));
    EmotionMetrics test_rep =
        evaluate_emotion(mlp.predict_emotion(x_test), labels_of(s.test));
    out.text = metrics_text(test_rep);
    double f = 0, acc = 0;
    for (std::size_t e = 0; e < kEmotionCount; ++e) {
      f += val_rep.f_score[e] / kEmotionCount;
      acc += val_rep.acc2[e] / kEmotionCount;
    }
    out.val_f = f;
    out.val_mae = 1.0 - acc;  // lower-is-better stand-in for ordering
  }
  return out;
}

Tensor embed_with_model(IccnModel& model, const Dataset& data,
                        const std::vector<std::size_t>& idx) {
  if (idx.empty()) throw DataError("empty split");
  Tensor out({idx.size(), model.embedding_dim()});
  for (std::size_t r = 0; r < idx.size(); ++r) {
    Tensor e = model.extract_embedding(data.records[idx[r]]);
    for (std::size_t j = 0; j < e.numel(); ++j) out(r, j) = e[j];
  }
  return out;
}

/// Default architecture resolved against the dataset's dims.
IccnConfig default_iccn_config(const Dataset& data) {
  IccnConfig cfg;
  cfg.d_t = data.d_t;
  cfg.d_a = data.d_a;
  cfg.d_v = data.d_v;
  cfg.conv2d = fit_conv2d_spec(
      cfg.conv2d, cfg.d_t,
      std::min(cfg.lstm_hidden_audio, cfg.lstm_hidden_video));
  return cfg;
}

// ---------------------------------------------------------------------------
// subcommands
// ---------------------------------------------------------------------------

struct GenArgs {
  std::string preset = "toy";
  std::string out = "data.mmf";
  std::uint64_t seed = 0;
  std::size_t n_train = 0, n_val = 0, n_test = 0;  // 0 = preset value
  bool linear = false;
};

int cmd_gen(const GenArgs& args) {
  SyntheticSpec spec = preset_spec(args.preset);
  spec.seed = args.seed;
  if (args.n_train) spec.n_train = args.n_train;
  if (args.n_val) spec.n_val = args.n_val;
  if (args.n_test) spec.n_test = args.n_test;
  if (args.linear) spec.nonlinear = false;
  Dataset data = generate(spec);
  // The MMF writer is already atomic at the byte level (full buffer).
  std::ostringstream buffer;
  const fs::path out = args.out;
  {
    const fs::path tmp = out.string() + ".tmp";
    save_mmf(data, tmp);
    fs::rename(tmp, out);
  }
  Splits s = split_by_prefix(data);
  std::ostringstream manifest;
  manifest << "train " << s.train.size() << '\n'
           << "val " << s.val.size() << '\n'
           << "test " << s.test.size() << '\n';
  atomic_write(out.string() + ".splits", manifest.str());
  json cfg{{"command", "gen"},
           {"preset", args.preset},
           {"out", args.out},
           {"spec", to_json(spec)}};
  atomic_write(out.string() + ".config.json", cfg.dump(2) + "\n");
  std::cout << "wrote " << out.string() << " (" << data.size()
            << " records: " << s.train.size() << "/" << s.val.size() << "/"
            << s.test.size() << ")\n";
  return 0;
}

struct TrainArgs {
  std::string data;
  std::string out = "run";
  std::string variant = "full";
  std::string split_fracs;
  std::size_t epochs = 30;
  double lr = 3e-4;
  std::size_t batch = 128;
  std::size_t loss_dim = 30;
  std::size_t embed_dim = 64;
  std::size_t lstm_hidden = 8;
  double eps = 1e-4;
  std::uint64_t seed = 0;
};

int cmd_train(const TrainArgs& args) {
  Dataset data = load_mmf(args.data);
  Splits s = resolve_splits(data, args.split_fracs, args.seed);
  IccnConfig cfg = default_iccn_config(data);
  cfg.variant = parse_variant(args.variant);
  cfg.epochs = args.epochs;
  cfg.lr = args.lr;
  cfg.batch = args.batch;
  cfg.loss.out_dim = args.loss_dim;
  cfg.loss.eps = args.eps;
  cfg.conv2d.embed_dim = args.embed_dim;
  cfg.lstm_hidden_audio = args.lstm_hidden;
  cfg.lstm_hidden_video = args.lstm_hidden;
  cfg.conv2d = fit_conv2d_spec(cfg.conv2d, cfg.d_t, args.lstm_hidden);
  cfg.seed = args.seed;

  IccnModel model(cfg);
  TrainingCurve curve = train_iccn(model, data, s.train);

  const fs::path out(args.out);
  fs::create_directories(out);
  save_checkpoint(out / "checkpoint.bin", model.params());
  atomic_write(out / "curves.csv", curve_csv(curve));
  json run{{"command", "train"},
           {"data", args.data},
           {"out", args.out},
           {"split_fracs", args.split_fracs},
           {"iccn", to_json(cfg)}};
  atomic_write(out / "config.json", run.dump(2) + "\n");
  std::cout << "trained " << variant_name(cfg.variant) << " for "
            << curve.size() << " epochs; checkpoint in " << out.string()
            << "\n";
  return 0;
}

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::string out = "eval";
  std::string split_fracs;
  std::size_t hidden = 64;
  double mlp_lr = 1e-3;
  std::size_t mlp_batch = 32;
  std::size_t mlp_epochs = 100;
  std::uint64_t seed = 0;
};

IccnConfig config_next_to_checkpoint(const fs::path& checkpoint) {
  const fs::path cfg_path = checkpoint.parent_path() / "config.json";
  std::ifstream is(cfg_path);
  if (!is) {
    throw DataError("cannot read '" + cfg_path.string() +
                    "' (expected next to the checkpoint)");
  }
  json j = json::parse(is);
  return iccn_from_json(j.at("iccn"));
}

int cmd_eval(const EvalArgs& args) {
  Dataset data = load_mmf(args.data);
  Splits s = resolve_splits(data, args.split_fracs, args.seed);
  IccnConfig cfg = config_next_to_checkpoint(args.checkpoint);
  IccnModel model(cfg);
  restore_params(model.params(), load_checkpoint(args.checkpoint));

  Tensor x_train = embed_with_model(model, data, s.train);
  Tensor x_val = embed_with_model(model, data, s.val);
  Tensor x_test = embed_with_model(model, data, s.test);
  MlpHyper hyper{{args.hidden}, args.mlp_lr, args.mlp_batch, args.mlp_epochs,
                 args.seed};
  EvalOutcome outcome = run_downstream(data, s, x_train, x_val, x_test, hyper);

  const fs::path out(args.out);
  fs::create_directories(out);
  atomic_write(out / "metrics.txt", outcome.text);
  json run{{"command", "eval"},
           {"checkpoint", args.checkpoint},
           {"data", args.data},
           {"out", args.out},
           {"split_fracs", args.split_fracs},
           {"iccn", to_json(cfg)},
           {"mlp", to_json(hyper)}};
  atomic_write(out / "config.json", run.dump(2) + "\n");
  std::cout << outcome.text;
  return 0;
}

struct BaselineArgs {
  std::string kind;
  std::string data;
  std::string out = "baseline";
  std::string split_fracs;
  std::size_t r = 30;
  double reg = 1e-4;
  std::size_t hidden = 64;
  double mlp_lr = 1e-3;
  std::size_t mlp_batch = 32;
  std::size_t mlp_epochs = 100;
  std::size_t dcca_epochs = 30;
  std::uint64_t seed = 0;
};

int cmd_baseline(const BaselineArgs& args) {
  Dataset data = load_mmf(args.data);
  Splits s = resolve_splits(data, args.split_fracs, args.seed);
  BaselineConfig cfg;
  cfg.r = args.r;
  cfg.reg = args.reg;
  cfg.seed = args.seed;
  cfg.dcca.hidden = {args.hidden};
  cfg.dcca.out_dim = args.r;
  cfg.dcca.loss = {std::max<std::size_t>(1, args.r / 2), args.reg,
                   kSpectrumFloor};
  cfg.dcca.epochs = args.dcca_epochs;
  cfg.dcca.seed = args.seed;
  BaselineModel model(parse_baseline_kind(args.kind), cfg);
  model.fit(data, s.train);
  Tensor x_train = model.embed_all(data, s.train);
  Tensor x_val = model.embed_all(data, s.val);
  Tensor x_test = model.embed_all(data, s.test);
  MlpHyper hyper{{args.hidden}, args.mlp_lr, args.mlp_batch, args.mlp_epochs,
                 args.seed};
  EvalOutcome outcome = run_downstream(data, s, x_train, x_val, x_test, hyper);

  const fs::path out(args.out);
  fs::create_directories(out);
  atomic_write(out / "metrics.txt", outcome.text);
  json run{{"command", "baseline"},
           {"kind", args.kind},
           {"data", args.data},
           {"out", args.out},
           {"split_fracs", args.split_fracs},
           {"r", args.r},
           {"reg", args.reg},
           {"mlp", to_json(hyper)},
           {"dcca_epochs", args.dcca_epochs},
           {"seed", args.seed}};
  atomic_write(out / "config.json", run.dump(2) + "\n");
  std::cout << outcome.text;
  return 0;
}

struct GridArgs {
  std::string data;
  std::string out = "grid";
  std::string variant = "full";
  std::string split_fracs;
  std::vector<double> lr{1e-5, 1e-4, 1e-3};
  std::vector<std::size_t> batch{128, 256, 512};
  std::vector<std::size_t> epochs{10, 32, 100};
  std::vector<std::size_t> hidden{64, 181, 512};
  std::vector<std::size_t> loss_dim{30, 55, 100};
  std::size_t embed_dim = 64;
  std::uint64_t seed = 0;
};

int cmd_grid(const GridArgs& args) {
  Dataset data = load_mmf(args.data);
  Splits s = resolve_splits(data, args.split_fracs, args.seed);
  if (args.lr.empty() || args.batch.empty() || args.epochs.empty() ||
      args.hidden.empty() || args.loss_dim.empty()) {
    throw ConfigError("grid: every axis needs at least one value");
  }
  const bool sentiment = data.task == Task::sentiment;
  std::ostringstream board;
  board << "cell,lr,batch,epochs,hidden,loss_dim,"
        << (sentiment ? "val_mae" : "val_f") << '\n';
  std::size_t cell = 0;
  std::size_t best_cell = 0;
  double best_metric = sentiment ? std::numeric_limits<double>::infinity()
                                 : -std::numeric_limits<double>::infinity();
  json best_config;
  std::string best_metrics_text;
  for (double lr : args.lr)
    for (std::size_t batch : args.batch)
      for (std::size_t epochs : args.epochs)
        for (std::size_t hidden : args.hidden)
          for (std::size_t loss_dim : args.loss_dim) {
            IccnConfig cfg = default_iccn_config(data);
            cfg.variant = parse_variant(args.variant);
            cfg.lr = lr;
            cfg.batch = batch;
            cfg.epochs = epochs;
            cfg.loss.out_dim = loss_dim;
            cfg.conv2d.embed_dim = args.embed_dim;
            cfg.seed = args.seed ^ cell;  // per-cell seed derivation
            IccnModel model(cfg);
            train_iccn(model, data, s.train, /*record_curve=*/false);
            Tensor x_train = embed_with_model(model, data, s.train);
            Tensor x_val = embed_with_model(model, data, s.val);
            Tensor x_test = embed_with_model(model, data, s.test);
            MlpHyper hyper{{hidden}, 1e-3, 32, 60, cfg.seed};
            EvalOutcome outcome =
                run_downstream(data, s, x_train, x_val, x_test, hyper);
            const double metric = sentiment ? outcome.val_mae : outcome.val_f;
            board << cell << ',' << fmt17(lr) << ',' << batch << ',' << epochs
                  << ',' << hidden << ',' << loss_dim << ',' << fmt17(metric)
                  << '\n';
            const bool better =
                sentiment ? metric < best_metric : metric > best_metric;
            if (better) {  // strict: ties keep the first cell
              best_metric = metric;
              best_cell = cell;
              best_config = json{{"cell", cell},
                                 {"iccn", to_json(cfg)},
                                 {"mlp", to_json(hyper)}};
              best_metrics_text = outcome.text;
            }
            ++cell;
          }
  const fs::path out(args.out);
  fs::create_directories(out);
  atomic_write(out / "leaderboard.csv", board.str());
  atomic_write(out / "best-config.json", best_config.dump(2) + "\n");
  atomic_write(out / "metrics-test.txt", best_metrics_text);
  json run{{"command", "grid"},
           {"data", args.data},
           {"out", args.out},
           {"variant", args.variant},
           {"split_fracs", args.split_fracs},
           {"lr", args.lr},
           {"batch", args.batch},
           {"epochs", args.epochs},
           {"hidden", args.hidden},
           {"loss_dim", args.loss_dim},
           {"embed_dim", args.embed_dim},
           {"seed", args.seed}};
  atomic_write(out / "config.json", run.dump(2) + "\n");
  std::cout << "grid of " << cell << " cells; best cell " << best_cell
            << " (" << (sentiment ? "val_mae" : "val_f") << " = "
            << fmt17(best_metric) << ")\n";
  return 0;
}

struct CurvesArgs {
  std::string run_dir;
  std::string out;
};

int cmd_curves(const CurvesArgs& args) {
  const fs::path path = fs::path(args.run_dir) / "curves.csv";
  std::ifstream is(path);
  if (!is) throw DataError("cannot read '" + path.string() + "'");
  std::string header;
  std::getline(is, header);
  if (header != "epoch,loss,mean_canonical_correlation,mean_cosine_similarity") {
    throw DataError("'" + path.string() + "' has unexpected columns: " + header);
  }
  std::ostringstream content;
  content << header << '\n';
  std::string line;
  std::size_t expect_epoch = 1;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::size_t epoch = 0;
    double loss, mcc, mcs;
    if (std::sscanf(line.c_str(), "%zu,%lf,%lf,%lf", &epoch, &loss, &mcc,
                    &mcs) != 4 ||
        epoch != expect_epoch) {
      throw DataError("'" + path.string() + "' is malformed at line '" + line +
                      "'");
    }
    ++expect_epoch;
    content << line << '\n';
  }
  if (args.out.empty()) {
    std::cout << content.str();
  } else {
    atomic_write(args.out, content.str());
    std::cout << "wrote " << args.out << " (" << expect_epoch - 1
              << " epochs)\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interaction canonical correlation network toolkit"};
  app.require_subcommand(1);

  GenArgs gen_args;
  CLI::App* gen = app.add_subcommand("gen", "Generate a synthetic MMF dataset");
  gen->add_option("--preset", gen_args.preset,
                  "mosi-like | mosei-like | iemocap-like | toy");
  gen->add_option("-o,--out", gen_args.out, "Output MMF path");
  gen->add_option("--seed", gen_args.seed, "Generator seed");
  gen->add_option("--train-n", gen_args.n_train, "Override train count");
  gen->add_option("--val-n", gen_args.n_val, "Override val count");
  gen->add_option("--test-n", gen_args.n_test, "Override test count");
  gen->add_flag("--linear", gen_args.linear,
                "Disable the nonlinear audio/video maps");

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "Train the interaction network");
  train->add_option("data", train_args.data, "MMF dataset")->required();
  train->add_option("-o,--out", train_args.out, "Output run directory");
  train->add_option("--variant", train_args.variant,
                    "full | no-text | cos | no-text+cos");
  train->add_option("--epochs", train_args.epochs, "Training epochs");
  train->add_option("--lr", train_args.lr, "Learning rate");
  train->add_option("--batch", train_args.batch, "Minibatch size");
  train->add_option("--loss-dim", train_args.loss_dim,
                    "Correlation components in the loss");
  train->add_option("--embed-dim", train_args.embed_dim,
                    "Feature width of each branch");
  train->add_option("--lstm-hidden", train_args.lstm_hidden,
                    "LSTM hidden size (both branches)");
  train->add_option("--eps", train_args.eps, "Covariance ridge in the loss");
  train->add_option("--seed", train_args.seed, "Run seed");
  train->add_option("--split-fracs", train_args.split_fracs,
                    "train,val,test fractions when ids carry no prefix");

  EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand(
      "eval", "Evaluate a checkpoint through the downstream task");
  eval->add_option("checkpoint", eval_args.checkpoint, "checkpoint.bin path")
      ->required();
  eval->add_option("data", eval_args.data, "MMF dataset")->required();
  eval->add_option("-o,--out", eval_args.out, "Output directory");
  eval->add_option("--hidden", eval_args.hidden, "Downstream MLP hidden width");
  eval->add_option("--mlp-lr", eval_args.mlp_lr, "Downstream learning rate");
  eval->add_option("--mlp-batch", eval_args.mlp_batch, "Downstream batch");
  eval->add_option("--mlp-epochs", eval_args.mlp_epochs, "Downstream epochs");
  eval->add_option("--seed", eval_args.seed, "Run seed");
  eval->add_option("--split-fracs", eval_args.split_fracs,
                   "train,val,test fractions when ids carry no prefix");

  BaselineArgs base_args;
  CLI::App* baseline = app.add_subcommand(
      "baseline", "Fit a CCA-family or concatenation baseline and evaluate");
  baseline->add_option("kind", base_args.kind, "Baseline kind")->required();
  baseline->add_option("data", base_args.data, "MMF dataset")->required();
  baseline->add_option("-o,--out", base_args.out, "Output directory");
  baseline->add_option("--r", base_args.r, "Solver output dimension");
  baseline->add_option("--reg", base_args.reg, "Solver regularization");
  baseline->add_option("--hidden", base_args.hidden, "MLP hidden width");
  baseline->add_option("--mlp-lr", base_args.mlp_lr, "MLP learning rate");
  baseline->add_option("--mlp-batch", base_args.mlp_batch, "MLP batch");
  baseline->add_option("--mlp-epochs", base_args.mlp_epochs, "MLP epochs");
  baseline->add_option("--dcca-epochs", base_args.dcca_epochs,
                       "Epochs for the dcca-concat baseline");
  baseline->add_option("--seed", base_args.seed, "Run seed");
  baseline->add_option("--split-fracs", base_args.split_fracs,
                       "train,val,test fractions when ids carry no prefix");

  GridArgs grid_args;
  CLI::App* grid = app.add_subcommand("grid", "Grid-search hyperparameters");
  grid->add_option("data", grid_args.data, "MMF dataset")->required();
  grid->add_option("-o,--out", grid_args.out, "Output directory");
  grid->add_option("--variant", grid_args.variant, "Model variant");
  grid->add_option("--grid-lr", grid_args.lr, "Learning-rate axis")
      ->delimiter(',');
  grid->add_option("--grid-batch", grid_args.batch, "Batch axis")
      ->delimiter(',');
  grid->add_option("--grid-epochs", grid_args.epochs, "Epoch axis")
      ->delimiter(',');
  grid->add_option("--grid-hidden", grid_args.hidden, "MLP hidden axis")
      ->delimiter(',');
  grid->add_option("--grid-loss-dim", grid_args.loss_dim, "Loss out_dim axis")
      ->delimiter(',');
  grid->add_option("--embed-dim", grid_args.embed_dim, "Branch feature width");
  grid->add_option("--seed", grid_args.seed, "Run seed");
  grid->add_option("--split-fracs", grid_args.split_fracs,
                   "train,val,test fractions when ids carry no prefix");

  CurvesArgs curves_args;
  CLI::App* curves = app.add_subcommand(
      "curves", "Validate and export a run's training curves");
  curves->add_option("run", curves_args.run_dir, "Run directory")->required();
  curves->add_option("-o,--out", curves_args.out, "Output CSV (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen(gen_args);
    if (train->parsed()) return cmd_train(train_args);
    if (eval->parsed()) return cmd_eval(eval_args);
    if (baseline->parsed()) return cmd_baseline(base_args);
    if (grid->parsed()) return cmd_grid(grid_args);
    if (curves->parsed()) return cmd_curves(curves_args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
