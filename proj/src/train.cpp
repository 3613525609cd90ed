#include "sfagc/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "sfagc/io.hpp"
#include "sfagc/metrics.hpp"

namespace sfagc {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::size_t to_count(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  unsigned long long out = 0;
  try {
    out = std::stoull(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != v.size() || v.empty() || v[0] == '-') throw std::invalid_argument(key + ": expected a count, got '" + v + "'");
  return static_cast<std::size_t>(out);
}

double to_real(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != v.size() || v.empty() || !std::isfinite(out)) throw std::invalid_argument(key + ": expected a number, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument(key + ": expected true or false, got '" + v + "'");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "task") task = value;
  else if (key == "data") data = value;
  else if (key == "network") network = value;
  else if (key == "epochs") epochs = to_count(key, value);
  else if (key == "batch_size") batch_size = to_count(key, value);
  else if (key == "lr") lr = to_real(key, value);
  else if (key == "lr_schedule") lr_schedule = value;
  else if (key == "dropout") dropout = to_real(key, value);
  else if (key == "head_hidden") head_hidden = to_count(key, value);
  else if (key == "seed") seed = to_count(key, value);
  else if (key == "ablation") ablation = value;
  else if (key == "out") out = value;
  else if (key == "rotate_augment") rotate_augment = to_bool(key, value);
  else if (key == "normalize") normalize = to_bool(key, value);
  else throw std::invalid_argument("unknown config key '" + key + "'");
}

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig cfg;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    try {
      cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  auto cfg = parse(read_file(path));
  // Relative data and spec paths resolve against the config's directory.
  const auto base = fs::path(path).parent_path();
  if (!cfg.data.empty() && fs::path(cfg.data).is_relative() && fs::exists(base / cfg.data)) cfg.data = (base / cfg.data).string();
  if (fs::path(cfg.network).is_relative() && fs::exists(base / cfg.network)) cfg.network = (base / cfg.network).string();
  return cfg;
}

void RunConfig::validate() const {
  if (task != "classify" && task != "segment") throw std::invalid_argument("task must be classify or segment, got '" + task + "'");
  if (data.empty()) throw std::invalid_argument("data: manifest path missing");
  if (epochs < 1) throw std::invalid_argument("epochs must be at least 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be at least 1");
  if (!(lr > 0.0)) throw std::invalid_argument("lr must be positive");
  if (lr_schedule != "constant" && lr_schedule != "cosine") {
    throw std::invalid_argument("lr_schedule must be constant or cosine, got '" + lr_schedule + "'");
  }
  if (dropout && (*dropout < 0.0 || *dropout >= 1.0)) throw std::invalid_argument("dropout must be in [0, 1)");
  if (head_hidden && *head_hidden == 0) throw std::invalid_argument("head_hidden must be positive");
  ablation_flags(ablation);
  if (out.empty()) throw std::invalid_argument("out: directory missing");
}

NetworkSpec resolve_network(const std::string& name_or_path) {
  const auto names = preset_names();
  if (std::find(names.begin(), names.end(), name_or_path) != names.end()) return preset_spec(name_or_path);
  if (!fs::exists(name_or_path)) {
    throw std::invalid_argument("network '" + name_or_path + "' is neither a preset nor a spec file");
  }
  return NetworkSpec::parse(read_file(name_or_path));
}

NetworkSpec run_spec(const RunConfig& cfg, const DatasetManifest& manifest) {
  auto spec = resolve_network(cfg.network);
  if (spec.task != cfg.task) throw std::invalid_argument("network is a " + spec.task + " network but task is " + cfg.task);
  if (manifest.task != cfg.task) throw std::invalid_argument("data is a " + manifest.task + " set but task is " + cfg.task);
  spec.classes = manifest.label_count();
  if (cfg.dropout) spec.dropout = *cfg.dropout;
  if (cfg.head_hidden) spec.head_hidden = *cfg.head_hidden;
  return ablation_variant(std::move(spec), cfg.ablation);
}

std::string EvalReport::summary() const {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  if (task == "classify") {
    os << "OA " << oa << "  mAcc " << macc << "  (" << samples << " samples)\n";
    for (const auto& [name, acc] : per_category) os << "  " << name << " accuracy " << acc << "\n";
  } else {
    os << "mIoU " << miou << "  (" << samples << " shapes)\n";
    for (const auto& [name, v] : per_category) os << "  " << name << " mIoU " << v << "\n";
  }
  return os.str();
}

EvalReport evaluate(const Network& net, const std::vector<Sample>& samples, const DatasetManifest& manifest) {
  if (samples.empty()) throw std::invalid_argument("evaluate: no samples");
  EvalReport r;
  r.task = net.segmentation() ? "segment" : "classify";
  r.samples = samples.size();
  std::vector<std::size_t> pred, truth;
  std::map<std::string, std::pair<double, std::size_t>> cat;
  double loss = 0.0, iou_sum = 0.0;
  for (const auto& s : samples) {
    Context ctx;
    auto out = net.forward(ctx, s.xyz);
    if (!net.segmentation()) {
      loss += classification_loss(out, s.label).item();
      pred.push_back(argmax(out.logits.values()));
      truth.push_back(s.label);
      continue;
    }
    loss += segmentation_loss(out, s.point_labels).item();
    const auto& name = manifest.classes.at(s.label);
    const auto& parts = manifest.parts.at(name);
    const std::size_t c = out.logits.cols();
    std::vector<std::size_t> p(s.point_labels.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
      std::size_t best = parts[0];
      for (auto part : parts) {
        if (out.logits[i * c + part] > out.logits[i * c + best]) best = part;
      }
      p[i] = best;
    }
    const double iou = shape_iou(p, s.point_labels, parts);
    iou_sum += iou;
    cat[name].first += iou;
    ++cat[name].second;
  }
  r.mean_loss = loss / static_cast<double>(samples.size());
  if (!net.segmentation()) {
    r.oa = overall_accuracy(pred, truth);
    r.macc = mean_class_accuracy(pred, truth);
    for (std::size_t c = 0; c < manifest.classes.size(); ++c) {
      std::size_t hit = 0, n = 0;
      for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] != c) continue;
        ++n;
        hit += pred[i] == c;
      }
      if (n) r.per_category[manifest.classes[c]] = double(hit) / double(n);
    }
  } else {
    r.miou = iou_sum / static_cast<double>(samples.size());
    for (const auto& [name, acc] : cat) r.per_category[name] = acc.first / double(acc.second);
  }
  return r;
}

std::string metrics_line(const EpochRecord& rec) {
  nlohmann::ordered_json j;
  j["epoch"] = rec.epoch;
  j["train_loss"] = rec.train_loss;
  j["test_loss"] = rec.test.mean_loss;
  if (rec.test.task == "classify") {
    j["test_oa"] = rec.test.oa;
    j["test_macc"] = rec.test.macc;
  } else {
    j["test_miou"] = rec.test.miou;
  }
  return j.dump();
}

namespace {

Tensor rotate_z(const Tensor& xyz, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  std::vector<double> out(xyz.values().begin(), xyz.values().end());
  for (std::size_t i = 0; i < xyz.rows(); ++i) {
    const double x = out[i * 3], y = out[i * 3 + 1];
    out[i * 3] = c * x - s * y;
    out[i * 3 + 1] = s * x + c * y;
  }
  return Tensor(xyz.shape(), std::move(out));
}

struct Prepared {
  DatasetManifest manifest;
  std::vector<Sample> train, test;
};

Prepared prepare(const RunConfig& cfg) {
  cfg.validate();
  Prepared p;
  p.manifest = load_manifest(cfg.data);
  p.train = load_split(p.manifest, "train");
  p.test = load_split(p.manifest, "test");
  if (p.train.empty()) throw std::invalid_argument("data: empty training split");
  if (p.test.empty()) throw std::invalid_argument("data: empty test split");
  if (cfg.normalize) {
    for (auto* split : {&p.train, &p.test}) {
      for (auto& s : *split) s.xyz = normalize_unit_sphere(s.xyz);
    }
  }
  return p;
}

struct Fit {
  Network net;
  std::vector<EpochRecord> history;
};

Fit fit(const RunConfig& cfg, const Prepared& data, std::ostream* progress, std::ostream* log) {
  Network net(run_spec(cfg, data.manifest), cfg.seed);
  Adam adam(net.params(), AdamConfig{cfg.lr});
  // Separate streams so that dropout draws do not shift the data order.
  std::mt19937_64 order_rng(cfg.seed * 2 + 1), drop_rng(cfg.seed * 2 + 2);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * 3.14159265358979323846);
  const auto params = net.params().all();
  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), 0);
  Fit result{std::move(net), {}};
  Network& model = result.net;
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    if (cfg.lr_schedule == "cosine") {
      const double frac = static_cast<double>(epoch - 1) / static_cast<double>(cfg.epochs);
      adam.set_lr(cfg.lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * frac)));
    }
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), b + cfg.batch_size);
      std::vector<std::vector<double>> acc(params.size());
      for (std::size_t i = 0; i < params.size(); ++i) acc[i].assign(params[i]->value.size(), 0.0);
      for (std::size_t j = b; j < end; ++j) {
        const auto& s = data.train[order[j]];
        const Tensor xyz = cfg.rotate_augment ? rotate_z(s.xyz, angle(order_rng)) : s.xyz;
        Tape tape;
        Context ctx(tape);
        ctx.training = true;
        ctx.rng = &drop_rng;
        auto out = model.forward(ctx, xyz);
        auto loss = model.segmentation() ? segmentation_loss(out, s.point_labels) : classification_loss(out, s.label);
        tape.backward(loss);
        loss_sum += loss.item();
        for (std::size_t i = 0; i < params.size(); ++i) {
          const auto g = ctx.grad(*params[i]);
          const auto gv = g.values();
          for (std::size_t e = 0; e < gv.size(); ++e) acc[i][e] += gv[e];
        }
      }
      const double inv = 1.0 / static_cast<double>(end - b);
      std::vector<Tensor> grads;
      grads.reserve(params.size());
      for (std::size_t i = 0; i < params.size(); ++i) {
        for (auto& v : acc[i]) v *= inv;
        grads.emplace_back(params[i]->value.shape(), std::move(acc[i]));
      }
      adam.step(grads);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.test = evaluate(model, data.test, data.manifest);
    if (log) *log << metrics_line(rec) << "\n" << std::flush;
    if (progress) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      *progress << "epoch " << epoch << "/" << cfg.epochs << "  loss " << std::fixed << std::setprecision(4) << rec.train_loss
                << "  test " << (rec.test.task == "classify" ? "OA " : "mIoU ")
                << (rec.test.task == "classify" ? rec.test.oa : rec.test.miou) << "  " << std::setprecision(1) << secs
                << " s\n"
                << std::defaultfloat << std::flush;
    }
    result.history.push_back(rec);
  }
  return result;
}

}  // namespace

TrainResult train(const RunConfig& cfg, std::ostream* progress) {
  const auto t0 = std::chrono::steady_clock::now();
  // Every config and data error surfaces here, before any training.
  const auto data = prepare(cfg);
  run_spec(cfg, data.manifest);
  fs::create_directories(cfg.out);
  TrainResult res;
  res.metrics_log = (fs::path(cfg.out) / "metrics.jsonl").string();
  res.checkpoint = (fs::path(cfg.out) / "model.ckpt").string();
  std::ofstream log(res.metrics_log);
  if (!log) throw std::runtime_error("cannot write '" + res.metrics_log + "'");
  auto f = fit(cfg, data, progress, &log);
  save_parameters(res.checkpoint, f.net.params());
  std::ofstream spec(res.checkpoint + ".spec");
  spec << f.net.spec().to_text();
  if (!spec) throw std::runtime_error("cannot write '" + res.checkpoint + ".spec'");
  res.history = std::move(f.history);
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

Network load_network(const std::string& checkpoint) {
  const std::string spec_path = checkpoint + ".spec";
  if (!fs::exists(spec_path)) throw IncompatibleCheckpoint("missing network description '" + spec_path + "'");
  Network net(NetworkSpec::parse(read_file(spec_path)), 0);
  try {
    load_parameters(checkpoint, net.params());
  } catch (const std::invalid_argument&) {
    throw;
  } catch (const std::runtime_error& e) {
    throw IncompatibleCheckpoint(std::string("checkpoint does not fit its network: ") + e.what());
  }
  return net;
}

EvalReport evaluate_checkpoint(const std::string& checkpoint, const std::string& manifest_path, const std::string& split) {
  auto net = load_network(checkpoint);
  auto manifest = load_manifest(manifest_path);
  const auto& spec = net.spec();
  if (spec.task != manifest.task) {
    throw IncompatibleCheckpoint("checkpoint is a " + spec.task + " network, data is a " + manifest.task + " set");
  }
  if (spec.classes != manifest.label_count()) {
    throw IncompatibleCheckpoint("width mismatch: output head has " + std::to_string(spec.classes) + " classes, data has " +
                                 std::to_string(manifest.label_count()));
  }
  auto samples = load_split(manifest, split);
  for (auto& s : samples) s.xyz = normalize_unit_sphere(s.xyz);
  return evaluate(net, samples, manifest);
}

namespace {

Tensor uniform_tensor(Shape shape, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  std::vector<double> v(shape_size(shape));
  for (auto& x : v) x = d(rng);
  return Tensor(std::move(shape), std::move(v));
}

Tensor flat(const std::vector<Tensor>& parts) {
  std::vector<Tensor> rows;
  for (const auto& p : parts) rows.push_back(ops::reshape(p, {p.size()}));
  return ops::concat(rows, 0);
}

struct Case {
  std::string name;
  std::shared_ptr<void> owner;  // keeps the store and inputs alive
  ParamStore* store = nullptr;
  std::function<Tensor(Context&)> output;
};

std::vector<Case> layer_cases() {
  auto store = std::make_shared<ParamStore>();
  std::mt19937_64 rng(31);
  SfagcConfig cfg;
  cfg.coord_in = 3;
  cfg.feat_in = 5;
  cfg.coord_out = 6;
  cfg.feat_out = 8;
  cfg.k = 4;
  auto params = std::make_shared<SfagcParams>(*store, "L.", cfg, rng);
  auto pts = std::make_shared<PointSet>(uniform_tensor({12, 3}, rng), uniform_tensor({12, 5}, rng));
  return {{"sfagc", store, store.get(), [params, pts](Context& ctx) {
             auto o = sfagc_forward(ctx, *pts, *params);
             return flat({o.feats, o.coords});
           }}};
}

std::vector<Case> pool_cases() {
  std::vector<Case> out;
  for (auto kind : {PoolKind::Score, PoolKind::Fps}) {
    auto store = std::make_shared<ParamStore>();
    std::mt19937_64 rng(41);
    PoolConfig cfg;
    cfg.kind = kind;
    cfg.t = 5;
    cfg.branch.coord_in = 3;
    cfg.branch.feat_in = 4;
    cfg.branch.coord_out = 5;
    cfg.branch.feat_out = 6;
    cfg.branch.k = 4;
    auto params = std::make_shared<PoolParams>(*store, "P.", cfg, rng);
    auto pts = std::make_shared<PointSet>(uniform_tensor({12, 3}, rng), uniform_tensor({12, 4}, rng));
    out.push_back({kind == PoolKind::Score ? "score_pool" : "fps_pool", store, store.get(), [params, pts](Context& ctx) {
                     auto o = graph_pool(ctx, *pts, *params);
                     return flat({o.points.feats, o.points.coords});
                   }});
  }
  {
    auto store = std::make_shared<ParamStore>();
    std::mt19937_64 rng(4);
    auto map = std::make_shared<Dense>(*store, "fp", 2 + 3, 4, false, rng);
    auto src = uniform_tensor({5, 3}, rng), feats = uniform_tensor({5, 2}, rng);
    auto dst = uniform_tensor({12, 3}, rng), skip = uniform_tensor({12, 3}, rng);
    out.push_back({"propagation", store, store.get(),
                   [=](Context& ctx) { return feature_propagation(ctx, src, feats, dst, &skip, map.get()); }});
  }
  {
    auto store = std::make_shared<ParamStore>();
    std::mt19937_64 rng(8);
    SetAbstractionConfig cfg;
    cfg.centroids = 5;
    cfg.scales = {{0.6, 4, {4, 5}}, {1.0, 6, {3}}};
    auto params = std::make_shared<SetAbstractionParams>(*store, "sa.", cfg, rng);
    auto xyz = uniform_tensor({12, 3}, rng);
    out.push_back({"set_abstraction", store, store.get(),
                   [params, xyz](Context& ctx) { return set_abstraction_msg(ctx, xyz, *params).points.feats; }});
  }
  return out;
}

const char* kGradClassifier = R"(task = classify
classes = 3
dropout = 0
head_hidden = 6
step = sfagc name=p1a coords=input feats=input k=4 co_out=4 f_out=6 coord=mlp
step = sfagc name=p1b coords=p1a.coords feats=p1a k=4 f_out=6 coord=identity
step = head name=h1 feats=p1b
step = pool_score name=g1 coords=feats feats=input,p1a,p1b k=4 t=8 co_out=4 f_out=8 coord=mlp
step = sfagc name=p2a coords=g1.coords feats=g1 k=4 co_out=4 f_out=8 coord=mlp
step = head name=h2 feats=p2a
)";

const char* kGradSegmenter = R"(task = segment
classes = 3
dropout = 0
head_hidden = 6
step = sfagc name=p1a coords=input feats=input k=4 co_out=4 f_out=6 coord=mlp
step = pool_fps name=g1 coords=input feats=input,p1a k=4 t=6 f_out=8 coord=identity
step = sfagc name=p2a coords=g1.coords feats=g1 k=4 co_out=4 f_out=8 coord=mlp
step = fp name=f1 from=p2a to=input skip=p1a f_out=8
step = seg_head name=out feats=f1
)";

std::vector<Case> model_cases() {
  std::vector<Case> out;
  for (const auto* text : {kGradClassifier, kGradSegmenter}) {
    auto net = std::make_shared<Network>(NetworkSpec::parse(text), 5);
    std::mt19937_64 rng(6);
    auto xyz = uniform_tensor({12, 3}, rng);
    std::vector<std::size_t> labels(12);
    for (std::size_t i = 0; i < 12; ++i) labels[i] = i % 3;
    out.push_back({net->segmentation() ? "segmenter" : "classifier", net, &net->params(),
                   [net = net.get(), xyz, labels](Context& ctx) {
                     auto o = net->forward(ctx, xyz);
                     return net->segmentation() ? segmentation_loss(o, labels) : classification_loss(o, 1);
                   }});
  }
  return out;
}

}  // namespace

std::vector<std::string> gradcheck_scopes() { return {"layer", "pool", "model"}; }

GradCheckReport run_gradcheck(const std::string& scope, const std::string& corrupt) {
  std::vector<Case> cases;
  if (scope == "layer") cases = layer_cases();
  else if (scope == "pool") cases = pool_cases();
  else if (scope == "model") cases = model_cases();
  else throw std::invalid_argument("unknown gradcheck scope '" + scope + "' (layer, pool, model)");
  GradCheckReport total;
  bool corrupted = corrupt.empty();
  for (auto& c : cases) {
    GradCheckOptions opts;
    const std::string prefix = c.name + "/";
    if (!corrupt.empty()) {
      if (corrupt.rfind(prefix, 0) == 0 && c.store->contains(corrupt.substr(prefix.size()))) {
        opts.corrupt = corrupt.substr(prefix.size());
      } else if (!corrupted && c.store->contains(corrupt)) {
        opts.corrupt = corrupt;
      }
      corrupted = corrupted || !opts.corrupt.empty();
    }
    auto r = check_gradients(*c.store, c.output, opts);
    total.tolerance = r.tolerance;
    for (auto& row : r.rows) {
      row.name = prefix + row.name;
      total.rows.push_back(std::move(row));
    }
  }
  if (!corrupted) throw std::invalid_argument("gradcheck: no parameter '" + corrupt + "' in scope " + scope);
  return total;
}

std::vector<AblationRow> ablation_study(RunConfig cfg, const std::vector<std::uint64_t>& seeds, std::ostream* progress) {
  if (seeds.empty()) throw std::invalid_argument("ablation: no seeds");
  const auto data = prepare(cfg);
  std::vector<AblationRow> rows;
  for (const auto& variant : ablation_names()) {
    AblationRow row;
    row.variant = variant;
    for (auto seed : seeds) {
      cfg.seed = seed;
      cfg.ablation = variant;
      auto f = fit(cfg, data, nullptr, nullptr);
      const auto& last = f.history.back().test;
      row.scores.push_back(last.task == "classify" ? last.oa : last.miou);
      if (progress) *progress << variant << " seed " << seed << ": " << row.scores.back() << "\n" << std::flush;
    }
    row.mean = std::accumulate(row.scores.begin(), row.scores.end(), 0.0) / static_cast<double>(row.scores.size());
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << std::left << std::setw(10) << "variant";
  if (!rows.empty()) {
    for (std::size_t i = 0; i < rows[0].scores.size(); ++i) os << std::setw(10) << ("seed" + std::to_string(i + 1));
  }
  os << "mean\n";
  for (const auto& r : rows) {
    os << std::setw(10) << r.variant;
    for (double s : r.scores) os << std::setw(10) << s;
    os << r.mean << "\n";
  }
  return os.str();
}

}  // namespace sfagc
