#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include "config.hpp"
#include "nsarm/atomic_file.hpp"
#include "nsarm/checkpoint.hpp"
#include "nsarm/evaluation.hpp"
#include "nsarm/image_io.hpp"
#include "nsarm/residual_codec.hpp"

namespace nsarm::cli {
namespace fs = std::filesystem;
namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  bool dry_run = false;
  std::vector<std::string> sets;
};

struct Context {
  RunConfig cfg;
  bool dry_run = false;
  std::ostream& out;
  std::ostream& err;
};

void require_file(const fs::path& p, const std::string& what) {
  if (!fs::is_regular_file(p)) throw ConfigError(what + " not found: " + p.string());
}

void require_dir(const fs::path& p, const std::string& what) {
  if (!fs::is_directory(p)) throw ConfigError(what + " not found: " + p.string());
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

// ---- dataset layout: <data>/gt/<id>.ppm, <data>/lr/<id>.ppm, <data>/split.csv

struct SplitEntry {
  std::string id;
  std::string split;
};

std::vector<SplitEntry> read_split(const fs::path& data_dir) {
  const fs::path p = data_dir / "split.csv";
  require_file(p, "split file");
  std::istringstream in(read_text(p));
  std::string line;
  std::getline(in, line);
  if (line != "image_id,split") throw std::runtime_error(p.string() + ": unexpected header '" + line + "'");
  std::vector<SplitEntry> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw std::runtime_error(p.string() + ": malformed row '" + line + "'");
    rows.push_back({line.substr(0, comma), line.substr(comma + 1)});
  }
  return rows;
}

std::vector<SrPair> load_pairs(const fs::path& data_dir, const std::string& split, std::vector<std::string>* ids = nullptr) {
  std::vector<SrPair> pairs;
  for (const auto& e : read_split(data_dir)) {
    if (e.split != split) continue;
    pairs.push_back({read_ppm(data_dir / "gt" / (e.id + ".ppm")), read_ppm(data_dir / "lr" / (e.id + ".ppm"))});
    if (ids) ids->push_back(e.id);
  }
  if (pairs.empty()) throw std::runtime_error("no '" + split + "' images in " + data_dir.string());
  return pairs;
}

std::vector<Tensor> gts_of(const std::vector<SrPair>& pairs) {
  std::vector<Tensor> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(p.gt);
  return out;
}

Nsarm load_model(const fs::path& path, const RunConfig& cfg) {
  require_file(path, "checkpoint");
  Nsarm model = restore(load_checkpoint(path));
  if (to_string(model.config.schedule) != to_string(cfg.model.schedule)) {
    throw std::runtime_error(path.string() + " was trained with schedule " + to_string(model.config.schedule) +
                             ", config has " + to_string(cfg.model.schedule));
  }
  return model;
}

void write_text(Context& ctx, const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  write_file_atomic(path, text);
  ctx.out << "wrote " << path.string() << "\n";
}

void write_image(Context& ctx, const fs::path& path, const Tensor& image) {
  fs::create_directories(path.parent_path());
  write_ppm(path, image);
  ctx.out << "wrote " << path.string() << "\n";
}

void write_checkpoint(Context& ctx, const fs::path& path, const Checkpoint& ckpt) {
  fs::create_directories(path.parent_path());
  save_checkpoint(path, ckpt);
  ctx.out << "wrote " << path.string() << "\n";
}

TrainHooks progress_hooks(Context& ctx, const std::string& stage, std::function<void(std::size_t)> on_checkpoint = {}) {
  TrainHooks hooks;
  hooks.on_step = [&ctx, stage](const LogRow& r) {
    if (r.step % 50 == 0) {
      ctx.out << stage << " step " << r.step << " loss " << fmt(r.loss);
      if (!std::isnan(r.bit_accuracy)) ctx.out << " bit_acc " << fmt(r.bit_accuracy);
      ctx.out << "\n";
    }
  };
  hooks.on_checkpoint = std::move(on_checkpoint);
  return hooks;
}

// ---- commands

void make_data(Context& ctx) {
  const RunConfig& c = ctx.cfg;
  ctx.out << "make-data: " << c.data.count << " images of " << c.data.side << "x" << c.data.side << " into "
          << c.data_dir.string() << "\n";
  if (ctx.dry_run) return;
  const auto gts = make_toy_dataset(c.data.count, c.data.side, Rng(c.seed));
  const auto pairs = make_pairs(gts, c.degradation, c.seed);
  std::ostringstream split;
  split << "image_id,split\n";
  fs::create_directories(c.data_dir / "gt");
  fs::create_directories(c.data_dir / "lr");
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "img%04zu", i);
    write_ppm(c.data_dir / "gt" / (std::string(id) + ".ppm"), pairs[i].gt);
    write_ppm(c.data_dir / "lr" / (std::string(id) + ".ppm"), pairs[i].lr);
    split << id << "," << (i + c.data.holdout >= pairs.size() ? "test" : "train") << "\n";
  }
  write_text(ctx, c.data_dir / "split.csv", split.str());
  write_text(ctx, c.data_dir / "config.txt", describe(c));
}

void train_tokenizer_cmd(Context& ctx) {
  const RunConfig& c = ctx.cfg;
  require_dir(c.data_dir, "data directory");
  ctx.out << "train-tokenizer: " << c.tokenizer.epochs << " epochs, then " << c.ar_pretrain.iterations
          << " AR pretraining steps\n";
  if (ctx.dry_run) return;
  const auto gts = gts_of(load_pairs(c.data_dir, "train"));
  Nsarm model(c.model, c.seed);
  auto ckpt_hook = [&](const std::string& stage) {
    return [&ctx, &model, stage](std::size_t step) {
      write_checkpoint(ctx, ctx.cfg.checkpoint_dir / (stage + "_step" + std::to_string(step) + ".nsrm"),
                       make_checkpoint(model, stage));
    };
  };
  const auto h1 = train_tokenizer(model.tokenizer, gts, c.model.schedule, c.tokenizer,
                                  progress_hooks(ctx, "tokenizer", ckpt_hook("tokenizer")));
  write_text(ctx, c.output_dir / "history_tokenizer.csv", history_csv(h1));
  std::string stage = "tokenizer";
  if (c.ar_pretrain.iterations > 0) {
    const auto h2 = train_ar_pretrain(model.ar, model.tokenizer, gts, c.ar_pretrain,
                                      progress_hooks(ctx, "ar_pretrain", ckpt_hook("ar_pretrain")));
    write_text(ctx, c.output_dir / "history_ar_pretrain.csv", history_csv(h2));
    stage = "ar_pretrain";
  }
  write_checkpoint(ctx, c.checkpoint_dir / "tokenizer.nsrm", make_checkpoint(model, stage));
}

void train_stage1_cmd(Context& ctx) {
  const RunConfig& c = ctx.cfg;
  require_dir(c.data_dir, "data directory");
  require_file(c.checkpoint_dir / "tokenizer.nsrm", "tokenizer checkpoint");
  ctx.out << "train-stage1: " << c.stage1.iterations << " steps\n";
  if (ctx.dry_run) return;
  const auto pairs = load_pairs(c.data_dir, "train");
  Nsarm model = load_model(c.checkpoint_dir / "tokenizer.nsrm", c);
  const auto h = train_stage1(model.tnet, model.tokenizer, pairs, c.stage1,
                              progress_hooks(ctx, "stage1", [&](std::size_t step) {
                                write_checkpoint(ctx, c.checkpoint_dir / ("stage1_step" + std::to_string(step) + ".nsrm"),
                                                 make_checkpoint(model, "stage1"));
                              }));
  write_text(ctx, c.output_dir / "history_stage1.csv", history_csv(h));
  write_checkpoint(ctx, c.checkpoint_dir / "stage1.nsrm", make_checkpoint(model, "stage1"));
}

void train_stage2_cmd(Context& ctx) {
  const RunConfig& c = ctx.cfg;
  const bool scratch = c.stage2.stage == Stage::stage2_from_scratch;
  const fs::path init = c.checkpoint_dir / (scratch ? "tokenizer.nsrm" : "stage1.nsrm");
  const std::string name = scratch ? "stage2_scratch" : "stage2";
  require_dir(c.data_dir, "data directory");
  require_file(init, "initial checkpoint");
  ctx.out << "train-stage2: " << c.stage2.iterations << " steps from " << init.string() << "\n";
  if (ctx.dry_run) return;
  const auto train = load_pairs(c.data_dir, "train");
  const auto test = load_pairs(c.data_dir, "test");
  Nsarm model = load_model(init, c);
  const auto h = train_stage2(model.tnet, model.ar, model.tokenizer, train, c.stage2,
                              progress_hooks(ctx, name, [&](std::size_t step) {
                                write_checkpoint(ctx, c.checkpoint_dir / (name + "_step" + std::to_string(step) + ".nsrm"),
                                                 make_checkpoint(model, name));
                              }));
  write_text(ctx, c.output_dir / ("history_" + name + ".csv"), history_csv(h));
  std::vector<std::size_t> idx(test.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const double acc = teacher_forced_accuracy(model.tnet, model.ar, model.tokenizer, test, idx).value();
  ctx.out << name << " held-out teacher-forced bit accuracy " << fmt(acc) << "\n";
  write_text(ctx, c.output_dir / (name + "_summary.csv"), "metric,value\nteacher_forced_bit_accuracy," + fmt(acc) + "\n");
  write_checkpoint(ctx, c.checkpoint_dir / (name + ".nsrm"), make_checkpoint(model, to_string(c.stage2.stage)));
}

struct InferOpts {
  std::string input;
  std::string checkpoint;
};

void infer_cmd(Context& ctx, const InferOpts& o) {
  const RunConfig& c = ctx.cfg;
  const fs::path ckpt = o.checkpoint.empty() ? c.checkpoint_dir / "stage2.nsrm" : fs::path(o.checkpoint);
  require_file(ckpt, "checkpoint");
  std::vector<std::pair<std::string, fs::path>> inputs;
  if (o.input.empty()) {
    require_dir(c.data_dir, "data directory");
    for (const auto& e : read_split(c.data_dir)) {
      if (e.split == "test") inputs.emplace_back(e.id, c.data_dir / "lr" / (e.id + ".ppm"));
    }
  } else if (fs::is_directory(o.input)) {
    for (const auto& entry : fs::directory_iterator(o.input)) {
      if (entry.path().extension() == ".ppm") inputs.emplace_back(entry.path().stem().string(), entry.path());
    }
    std::sort(inputs.begin(), inputs.end());
  } else {
    require_file(o.input, "input image");
    inputs.emplace_back(fs::path(o.input).stem().string(), o.input);
  }
  ctx.out << "infer: " << inputs.size() << " images with " << ckpt.string() << "\n";
  if (ctx.dry_run) return;
  const Nsarm model = load_model(ckpt, c);
  for (const auto& [id, path] : inputs) {
    const Generation g = super_resolve(model, read_ppm(path), c.sampling);
    write_image(ctx, c.output_dir / "infer" / (id + ".ppm"), g.image);
  }
}

struct PathwayOpts {
  std::string ref;
  std::string k = "0..K";
  std::string checkpoint;
};

std::vector<std::size_t> parse_k_range(const std::string& text, std::size_t K) {
  auto one = [&](const std::string& s) -> std::size_t {
    if (s == "K") return K;
    std::size_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || v > K) {
      throw ConfigError("--k: '" + s + "' is not an integer in 0.." + std::to_string(K));
    }
    return v;
  };
  const auto dots = text.find("..");
  std::vector<std::size_t> ks;
  if (dots == std::string::npos) {
    ks.push_back(one(text));
  } else {
    const std::size_t a = one(text.substr(0, dots)), b = one(text.substr(dots + 2));
    if (a > b) throw ConfigError("--k: empty range '" + text + "'");
    for (std::size_t k = a; k <= b; ++k) ks.push_back(k);
  }
  return ks;
}

void pathway_cmd(Context& ctx, const PathwayOpts& o) {
  const RunConfig& c = ctx.cfg;
  const fs::path ckpt = o.checkpoint.empty() ? c.checkpoint_dir / "stage2.nsrm" : fs::path(o.checkpoint);
  require_file(o.ref, "reference image");
  require_file(ckpt, "checkpoint");
  const auto ks = parse_k_range(o.k, c.model.schedule.size());
  ctx.out << "pathway: " << ks.size() << " values of k_replace\n";
  if (ctx.dry_run) return;
  const Nsarm model = load_model(ckpt, c);
  const Tensor ref = read_ppm(o.ref);
  const Tensor target = encode_image(model.tokenizer, ref);
  std::ostringstream csv;
  csv << "k_replace,latent_distance\n";
  for (std::size_t k : ks) {
    const Generation g = pathway_replace_generate(model, ref, k, c.sampling);
    write_image(ctx, c.output_dir / "pathway" / ("k" + std::to_string(k) + ".ppm"), g.image);
    csv << k << "," << fmt(l2_norm(sub(g.latent, target))) << "\n";
  }
  write_text(ctx, c.output_dir / "pathway" / "distances.csv", csv.str());
}

struct DecomposeOpts {
  std::string image;
  std::string checkpoint;
};

void decompose_cmd(Context& ctx, const DecomposeOpts& o) {
  const RunConfig& c = ctx.cfg;
  const fs::path ckpt = o.checkpoint.empty() ? c.checkpoint_dir / "tokenizer.nsrm" : fs::path(o.checkpoint);
  require_file(o.image, "image");
  require_file(ckpt, "checkpoint");
  ctx.out << "decompose: " << o.image << "\n";
  if (ctx.dry_run) return;
  const Nsarm model = load_model(ckpt, c);
  const Tensor f = encode_image(model.tokenizer, read_ppm(o.image));
  const ResidualQueue q = decompose(f, c.model.schedule, bsq_quantizer());
  const std::string stem = fs::path(o.image).stem().string();
  const auto stream = encode_token_stream(labels(q));
  fs::create_directories(c.output_dir / "decompose");
  write_file_atomic(c.output_dir / "decompose" / (stem + ".tokens"), stream);
  ctx.out << "wrote " << (c.output_dir / "decompose" / (stem + ".tokens")).string() << "\n";
  std::ostringstream csv;
  csv << "k,h,w,latent_error\n";
  for (std::size_t k = 1; k <= c.model.schedule.size(); ++k) {
    const Extent e = c.model.schedule.scale(k);
    csv << k << "," << e.h << "," << e.w << "," << fmt(l2_norm(sub(accumulate(q, k), f))) << "\n";
  }
  write_text(ctx, c.output_dir / "decompose" / (stem + "_errors.csv"), csv.str());
  write_image(ctx, c.output_dir / "decompose" / (stem + "_reconstruction.ppm"),
              decode_latent(model.tokenizer, accumulate(q, c.model.schedule.size())));
}

struct EvalImagesOpts {
  std::string pred;
  std::string gt;
  std::string dataset = "toy";
  std::string scores;
};

void eval_images_cmd(Context& ctx, const EvalImagesOpts& o) {
  const RunConfig& c = ctx.cfg;
  const fs::path pred = o.pred.empty() ? c.output_dir / "infer" : fs::path(o.pred);
  const fs::path gt = o.gt.empty() ? c.data_dir / "gt" : fs::path(o.gt);
  const fs::path scores = o.scores.empty() ? c.output_dir / "scores.csv" : fs::path(o.scores);
  require_dir(pred, "prediction directory");
  require_dir(gt, "ground-truth directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(pred)) {
    if (entry.path().extension() == ".ppm") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) require_file(gt / f.filename(), "ground truth for " + f.filename().string());
  ctx.out << "eval-images: " << files.size() << " images\n";
  if (ctx.dry_run) return;
  ScoreTable table;
  for (const auto& f : files) {
    const Tensor a = read_ppm(f), b = read_ppm(gt / f.filename());
    const std::string id = f.stem().string();
    table.add({id, o.dataset, "psnr", psnr(a, b)});
    table.add({id, o.dataset, "ssim", ssim(a, b)});
  }
  write_text(ctx, scores, table.to_csv());
}

struct ScoresOpts {
  std::string scores;
  std::vector<std::string> metrics;
};

std::vector<std::string> split_metrics(const std::string& set) {
  std::vector<std::string> out;
  std::istringstream in(set);
  std::string m;
  while (std::getline(in, m, ',')) {
    if (!m.empty()) out.push_back(m);
  }
  if (out.empty()) throw ConfigError("--metrics: empty metric set");
  return out;
}

std::string join(const std::vector<std::string>& v, const std::string& sep) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? sep : "") + v[i];
  return s;
}

ScoreTable load_scores(const ScoresOpts& o) {
  require_file(o.scores, "score file");
  return ScoreTable::parse_csv(read_text(o.scores));
}

void eval_scores_cmd(Context& ctx, const ScoresOpts& o) {
  const RunConfig& c = ctx.cfg;
  std::vector<std::vector<std::string>> sets;
  for (const auto& s : o.metrics) sets.push_back(split_metrics(s));
  require_file(o.scores, "score file");
  ctx.out << "eval-scores: " << o.scores << "\n";
  if (ctx.dry_run) return;
  const ScoreTable table = load_scores(o);
  if (sets.empty()) {
    for (const auto& m : table.metrics()) sets.push_back({m});
  }
  std::ostringstream var;
  var << "dataset,metric,mean,variance,n\n";
  for (const auto& ds : table.datasets()) {
    for (const auto& m : table.metrics()) {
      if (table.scores(ds, m).empty()) continue;
      const VarianceReport r = variance_report(table, ds, m);
      var << ds << "," << m << "," << fmt(r.mean) << "," << fmt(r.variance) << "," << r.n << "\n";
    }
    for (const auto& set : sets) {
      const auto curve = sorted_curve(table, ds, set, c.metric_scales);
      const std::string base = "curve_" + ds + "_" + join(set, "+");
      write_text(ctx, c.output_dir / (base + ".csv"), curve_csv(curve));
      write_text(ctx, c.output_dir / (base + ".svg"), curve_svg(curve, ds + ": " + join(set, "+")));
    }
  }
  write_text(ctx, c.output_dir / "variance.csv", var.str());
}

void report_robustness_cmd(Context& ctx, const ScoresOpts& o) {
  const RunConfig& c = ctx.cfg;
  if (o.metrics.empty()) throw ConfigError("report-robustness needs --metrics");
  std::vector<std::vector<std::string>> sets;
  for (const auto& s : o.metrics) sets.push_back(split_metrics(s));
  require_file(o.scores, "score file");
  ctx.out << "report-robustness: " << o.scores << "\n";
  if (ctx.dry_run) return;
  const ScoreTable table = load_scores(o);
  std::vector<FailureReportRow> rows;
  for (const auto& ds : table.datasets()) {
    for (const auto& set : sets) {
      std::vector<double> avg;
      for (const auto& r : sorted_curve(table, ds, set, c.metric_scales)) avg.push_back(r.avg_score);
      rows.push_back({ds, join(set, "+"), failure_counts(avg)});
    }
  }
  write_text(ctx, c.output_dir / "robustness.csv", failure_report_csv(rows));
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Next-scale autoregressive super-resolution toolkit", "nsarm"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "key = value config file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Seed for data, initialisation and sampling; forces --workers 1");
  app.add_option("--workers", g.workers, "Worker threads (default: available cores)");
  app.add_flag("--dry-run", g.dry_run, "Validate config and inputs, write nothing");
  app.add_option("--set", g.sets, "Override a config key: section.key=value")->take_all();

  InferOpts infer;
  PathwayOpts pathway;
  DecomposeOpts dec;
  EvalImagesOpts evi;
  ScoresOpts evs, rob;

  auto* make = app.add_subcommand("make-data", "Synthesize the toy GT/LR dataset");
  auto* tok = app.add_subcommand("train-tokenizer", "Train the tokenizer, then pretrain the AR model");
  auto* s1 = app.add_subcommand("train-stage1", "Train the transformation network");
  auto* s2 = app.add_subcommand("train-stage2", "Joint teacher-forced training");
  auto* inf = app.add_subcommand("infer", "Super-resolve LR images");
  inf->add_option("--input", infer.input, "LR image or directory (default: held-out split)");
  inf->add_option("--checkpoint", infer.checkpoint, "Model checkpoint (default: <checkpoints>/stage2.nsrm)");
  auto* pw = app.add_subcommand("pathway", "Pathway-replacement sweep against a reference image");
  pw->add_option("--ref", pathway.ref, "Reference image (GT resolution)")->required();
  pw->add_option("--k", pathway.k, "k_replace value or range a..b (K = last scale)");
  pw->add_option("--checkpoint", pathway.checkpoint, "Model checkpoint (default: <checkpoints>/stage2.nsrm)");
  auto* dc = app.add_subcommand("decompose", "Multi-scale BSQ decomposition of an image");
  dc->add_option("--image", dec.image, "Image to encode")->required();
  dc->add_option("--checkpoint", dec.checkpoint, "Tokenizer checkpoint (default: <checkpoints>/tokenizer.nsrm)");
  auto* ei = app.add_subcommand("eval-images", "PSNR/SSIM of predictions against ground truth");
  ei->add_option("--pred", evi.pred, "Prediction directory (default: <output>/infer)");
  ei->add_option("--gt", evi.gt, "Ground-truth directory (default: <data>/gt)");
  ei->add_option("--dataset", evi.dataset, "Dataset name written to the score table");
  ei->add_option("--scores", evi.scores, "Score CSV to write (default: <output>/scores.csv)");
  auto* es = app.add_subcommand("eval-scores", "Sorted curves and variance from a score CSV");
  es->add_option("--scores", evs.scores, "Score CSV")->required();
  es->add_option("--metrics", evs.metrics, "Comma-separated metric set (repeatable)");
  auto* rr = app.add_subcommand("report-robustness", "Failure counts from a score CSV");
  rr->add_option("--scores", rob.scores, "Score CSV")->required();
  rr->add_option("--metrics", rob.metrics, "Comma-separated metric set (repeatable)");
  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(std::move(rev));
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  std::optional<Context> ctx;
  try {
    KeyValues kv;
    if (!g.config.empty()) kv = KeyValues::parse(read_text(g.config));
    for (const auto& s : g.sets) kv.set_assignment(s);
    if (g.seed) kv.set("run.seed", std::to_string(*g.seed));
    if (!kv.entries().count("run.workers")) {
      kv.set("run.workers", std::to_string(std::max(1u, std::thread::hardware_concurrency())));
    }
    if (g.workers) kv.set("run.workers", std::to_string(*g.workers));
    RunConfig cfg = build_config(kv);
    if (g.seed) cfg.workers = 1;
    ctx.emplace(Context{std::move(cfg), g.dry_run, out, err});

    if (make->parsed()) make_data(*ctx);
    if (tok->parsed()) train_tokenizer_cmd(*ctx);
    if (s1->parsed()) train_stage1_cmd(*ctx);
    if (s2->parsed()) train_stage2_cmd(*ctx);
    if (inf->parsed()) infer_cmd(*ctx, infer);
    if (pw->parsed()) pathway_cmd(*ctx, pathway);
    if (dc->parsed()) decompose_cmd(*ctx, dec);
    if (ei->parsed()) eval_images_cmd(*ctx, evi);
    if (es->parsed()) eval_scores_cmd(*ctx, evs);
    if (rr->parsed()) report_robustness_cmd(*ctx, rob);
    if (g.dry_run) out << "dry run: configuration valid, nothing written\n";
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace nsarm::cli
