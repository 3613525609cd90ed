#include "sfagc/network.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace sfagc {

namespace {

const std::map<std::string, StepKind> kKinds = {
    {"sfagc", StepKind::Sfagc},          {"pool_score", StepKind::PoolScore}, {"pool_fps", StepKind::PoolFps},
    {"sa", StepKind::SetAbstraction},    {"fp", StepKind::Propagate},         {"head", StepKind::Head},
    {"seg_head", StepKind::SegHead},
};

std::string kind_name(StepKind k) {
  for (const auto& [name, kind] : kKinds) {
    if (kind == k) return name;
  }
  return "?";
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string join(const std::vector<std::string>& v, char sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? std::string(1, sep) : "") + v[i];
  return out;
}

std::size_t parse_count(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  unsigned long long n = 0;
  try {
    n = std::stoull(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != v.size() || v.empty() || v[0] == '-') throw std::invalid_argument(key + ": expected a count, got '" + v + "'");
  return static_cast<std::size_t>(n);
}

double parse_real(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != v.size() || v.empty()) throw std::invalid_argument(key + ": expected a number, got '" + v + "'");
  return x;
}

// r:group:w1/w2;r:group:w
std::vector<GroupScale> parse_scales(const std::string& v) {
  std::vector<GroupScale> out;
  for (const auto& s : split(v, ';')) {
    auto f = split(s, ':');
    if (f.size() != 3) throw std::invalid_argument("scales: expected radius:group:widths, got '" + s + "'");
    GroupScale g;
    g.radius = parse_real("scales", f[0]);
    g.group = parse_count("scales", f[1]);
    for (const auto& w : split(f[2], '/')) g.widths.push_back(parse_count("scales", w));
    out.push_back(g);
  }
  return out;
}

std::string format_real(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

StepSpec parse_step(const std::string& text) {
  std::istringstream is(text);
  std::string kind;
  is >> kind;
  auto it = kKinds.find(kind);
  if (it == kKinds.end()) throw std::invalid_argument("unknown step kind '" + kind + "'");
  StepSpec s;
  s.kind = it->second;
  std::string tok;
  while (is >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("step " + kind + ": expected key=value, got '" + tok + "'");
    const auto key = tok.substr(0, eq), val = tok.substr(eq + 1);
    if (key == "name") s.name = val;
    else if (key == "coords") s.coords = val;
    else if (key == "feats" || key == "from") s.feats = split(val, ',');
    else if (key == "to") s.to = val;
    else if (key == "skip") s.skip = split(val, ',');
    else if (key == "k") s.k = parse_count(key, val);
    else if (key == "t") s.t = parse_count(key, val);
    else if (key == "co_out") s.co_out = parse_count(key, val);
    else if (key == "f_out") s.f_out = parse_count(key, val);
    else if (key == "centroids") s.centroids = parse_count(key, val);
    else if (key == "hidden") s.hidden = parse_count(key, val);
    else if (key == "scales") s.scales = parse_scales(val);
    else if (key == "coord") {
      if (val == "mlp") s.coord = CoordUpdate::Mlp;
      else if (val == "identity") s.coord = CoordUpdate::Identity;
      else throw std::invalid_argument("coord: expected mlp or identity, got '" + val + "'");
    } else {
      throw std::invalid_argument("step " + kind + ": unknown key '" + key + "'");
    }
  }
  if (s.name.empty()) throw std::invalid_argument("step " + kind + " has no name");
  return s;
}

struct Ref {
  std::string step;
  bool coords = false;
};

Ref parse_ref(const std::string& r) {
  const std::string suffix = ".coords";
  if (r.size() > suffix.size() && r.compare(r.size() - suffix.size(), suffix.size(), suffix) == 0) {
    return {r.substr(0, r.size() - suffix.size()), true};
  }
  return {r, false};
}

}  // namespace

NetworkSpec NetworkSpec::parse(const std::string& text) {
  NetworkSpec spec;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("line " + std::to_string(lineno) + ": expected key = value");
    const auto key = trim(line.substr(0, eq)), val = trim(line.substr(eq + 1));
    try {
      if (key == "step") spec.steps.push_back(parse_step(val));
      else if (key == "task") spec.task = val;
      else if (key == "classes") spec.classes = parse_count(key, val);
      else if (key == "dropout") spec.dropout = parse_real(key, val);
      else if (key == "head_hidden") spec.head_hidden = parse_count(key, val);
      else if (key == "slope") spec.slope = parse_real(key, val);
      else if (key == "fps_start") {
        if (val == "first") spec.fps_start = FpsStart::First;
        else if (val == "maxnorm") spec.fps_start = FpsStart::MaxNorm;
        else throw std::invalid_argument("fps_start: expected first or maxnorm");
      } else if (key == "ablation") spec.flags = ablation_flags(val);
      else throw std::invalid_argument("unknown key '" + key + "'");
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (spec.task != "classify" && spec.task != "segment") {
    throw std::invalid_argument("task must be classify or segment, got '" + spec.task + "'");
  }
  return spec;
}

std::string NetworkSpec::to_text() const {
  std::ostringstream os;
  os << "task = " << task << "\n";
  os << "classes = " << classes << "\n";
  os << "dropout = " << format_real(dropout) << "\n";
  os << "head_hidden = " << head_hidden << "\n";
  os << "slope = " << format_real(slope) << "\n";
  os << "fps_start = " << (fps_start == FpsStart::MaxNorm ? "maxnorm" : "first") << "\n";
  for (const auto& v : ablation_names()) {
    if (ablation_flags(v) == flags) {
      os << "ablation = " << v << "\n";
      break;
    }
  }
  for (const auto& s : steps) {
    os << "step = " << kind_name(s.kind) << " name=" << s.name;
    if (!s.coords.empty()) os << " coords=" << s.coords;
    if (!s.feats.empty()) os << (s.kind == StepKind::Propagate ? " from=" : " feats=") << join(s.feats, ',');
    if (!s.to.empty()) os << " to=" << s.to;
    if (!s.skip.empty()) os << " skip=" << join(s.skip, ',');
    switch (s.kind) {
      case StepKind::Sfagc:
      case StepKind::PoolScore:
      case StepKind::PoolFps:
        os << " k=" << s.k;
        if (s.t) os << " t=" << s.t;
        if (s.co_out) os << " co_out=" << s.co_out;
        os << " f_out=" << s.f_out << " coord=" << (s.coord == CoordUpdate::Mlp ? "mlp" : "identity");
        break;
      case StepKind::SetAbstraction: {
        os << " centroids=" << s.centroids << " scales=";
        for (std::size_t i = 0; i < s.scales.size(); ++i) {
          std::vector<std::string> w;
          for (auto x : s.scales[i].widths) w.push_back(std::to_string(x));
          os << (i ? ";" : "") << format_real(s.scales[i].radius) << ":" << s.scales[i].group << ":" << join(w, '/');
        }
        break;
      }
      case StepKind::Propagate:
        os << " f_out=" << s.f_out;
        break;
      case StepKind::Head:
      case StepKind::SegHead:
        if (s.hidden) os << " hidden=" << s.hidden;
        break;
    }
    os << "\n";
  }
  return os.str();
}

std::vector<std::string> preset_names() { return {"classify-full", "classify-toy", "segment-full", "segment-toy"}; }

NetworkSpec preset_spec(const std::string& name) {
  // Phase i of the classification network ends in head h<i>; pools g<j> feed
  // the next phase. The segmentation encoder mirrors it with FPS pools and a
  // two-stage propagation decoder.
  static const std::map<std::string, std::string> texts = {
      {"classify-full", R"(task = classify
dropout = 0.3
head_hidden = 256
step = sfagc name=p1a coords=input feats=input k=20 co_out=32 f_out=64 coord=mlp
step = sfagc name=p1b coords=p1a.coords feats=p1a k=20 f_out=64 coord=identity
step = head name=h1 feats=p1b
step = pool_score name=g1 coords=feats feats=input,p1a,p1b k=36 t=512 co_out=32 f_out=64 coord=mlp
step = sfagc name=p2a coords=g1.coords feats=g1 k=20 co_out=64 f_out=64 coord=mlp
step = sfagc name=p2b coords=p2a.coords feats=p2a k=20 f_out=128 coord=identity
step = head name=h2 feats=p2b
step = pool_score name=g2 coords=feats feats=g1,p2a,p2b,p1b k=64 t=128 co_out=64 f_out=128 coord=mlp
step = sfagc name=p3a coords=g2.coords feats=g2 k=20 co_out=128 f_out=256 coord=mlp
step = sfagc name=p3b coords=p3a.coords feats=p3a k=20 f_out=256 coord=identity
step = head name=h3 feats=p3b
step = sfagc name=p4a coords=g2.coords feats=g2 k=20 co_out=64 f_out=128 coord=mlp
step = sfagc name=p4b coords=p4a.coords feats=p4a k=20 f_out=128 coord=identity
step = head name=h4 feats=p4b
step = pool_score name=g3 coords=feats feats=g2,p4a,p4b k=64 t=128 co_out=128 f_out=128 coord=mlp
step = sfagc name=p5a coords=g3.coords feats=g3 k=20 co_out=128 f_out=256 coord=mlp
step = sfagc name=p5b coords=p5a.coords feats=p5a k=20 f_out=256 coord=identity
step = head name=h5 feats=p5b
step = sa name=p6 coords=input centroids=512 scales=0.2:32:64;0.4:128:64
step = head name=h6 feats=p6
)"},
      {"classify-toy", R"(task = classify
dropout = 0.3
head_hidden = 64
step = sfagc name=p1a coords=input feats=input k=8 co_out=16 f_out=24 coord=mlp
step = sfagc name=p1b coords=p1a.coords feats=p1a k=8 f_out=24 coord=identity
step = head name=h1 feats=p1b
step = pool_score name=g1 coords=feats feats=input,p1a,p1b k=8 t=32 co_out=16 f_out=32 coord=mlp
step = sfagc name=p2a coords=g1.coords feats=g1 k=8 co_out=16 f_out=32 coord=mlp
step = sfagc name=p2b coords=p2a.coords feats=p2a k=8 f_out=64 coord=identity
step = head name=h2 feats=p2b
)"},
      {"segment-full", R"(task = segment
dropout = 0.4
head_hidden = 128
step = sfagc name=p1a coords=input feats=input k=20 co_out=32 f_out=64 coord=mlp
step = sfagc name=p1b coords=p1a.coords feats=p1a k=20 f_out=64 coord=identity
step = pool_fps name=g1 coords=input feats=input,p1a,p1b k=36 t=512 f_out=64 coord=identity
step = sfagc name=p2a coords=g1.coords feats=g1 k=20 co_out=32 f_out=64 coord=mlp
step = sfagc name=p2b coords=p2a.coords feats=p2a k=20 f_out=128 coord=identity
step = pool_fps name=g2 coords=g1.coords feats=g1,p2a,p2b,p1b k=64 t=128 f_out=128 coord=identity
step = sfagc name=p3a coords=g2.coords feats=g2 k=20 co_out=128 f_out=256 coord=mlp
step = sfagc name=p3b coords=p3a.coords feats=p3a k=20 f_out=256 coord=identity
step = fp name=f1 from=p3a,p3b,g2 to=g1 skip=p2b f_out=256
step = fp name=f2 from=f1 to=input skip=p1a,p1b f_out=128
step = seg_head name=out feats=f2
)"},
      {"segment-toy", R"(task = segment
dropout = 0.4
head_hidden = 64
step = sfagc name=p1a coords=input feats=input k=8 co_out=16 f_out=24 coord=mlp
step = sfagc name=p1b coords=p1a.coords feats=p1a k=8 f_out=24 coord=identity
step = pool_fps name=g1 coords=input feats=input,p1a,p1b k=8 t=32 f_out=32 coord=identity
step = sfagc name=p2a coords=g1.coords feats=g1 k=8 co_out=16 f_out=32 coord=mlp
step = sfagc name=p2b coords=p2a.coords feats=p2a k=8 f_out=64 coord=identity
step = fp name=f1 from=p2a,p2b,g1 to=input skip=p1a,p1b f_out=64
step = seg_head name=out feats=f1
)"},
  };
  auto it = texts.find(name);
  if (it == texts.end()) throw std::invalid_argument("unknown network preset '" + name + "'");
  return NetworkSpec::parse(it->second);
}

std::vector<std::string> ablation_names() { return {"full", "nS", "nP", "ndot", "nsub"}; }

AblationFlags ablation_flags(const std::string& variant) {
  AblationFlags f;
  if (variant == "full") return f;
  if (variant == "nS") f.use_structure = false;
  else if (variant == "nP") f.use_position = false;
  else if (variant == "ndot") f.use_dot = false;
  else if (variant == "nsub") f.use_sub = false;
  else throw std::invalid_argument("unknown ablation variant '" + variant + "' (full, nS, nP, ndot, nsub)");
  return f;
}

NetworkSpec ablation_variant(NetworkSpec spec, const std::string& variant) {
  spec.flags = ablation_flags(variant);
  return spec;
}

// ---------------------------------------------------------------------------

struct Network::Impl {
  struct Step {
    StepSpec spec;
    int level = 0;      // level the inputs are read at
    int out_level = 0;  // level of the outputs
    int src_level = 0;  // fp only
    SfagcParams sfagc;
    PoolParams pool;
    SetAbstractionParams sa;
    Dense map, fc1, fc2;
  };
  struct Info {
    int level;
    std::size_t coord_w, feat_w;
  };

  std::vector<Step> steps;
  std::vector<int> parent{-1};

  bool is_ancestor(int a, int b) const {
    for (int cur = b; cur >= 0; cur = parent[static_cast<std::size_t>(cur)]) {
      if (cur == a) return true;
    }
    return false;
  }

  int deepest(const std::vector<int>& levels, const std::string& step) const {
    int best = levels.front();
    for (int l : levels) {
      if (is_ancestor(best, l)) best = l;
      else if (!is_ancestor(l, best)) throw std::invalid_argument("step " + step + ": inputs come from unrelated point levels");
    }
    return best;
  }

  // Indices into level `from` for every node of level `to`; `from` must be
  // an ancestor of `to`.
  struct Runtime {
    const Impl* impl;
    std::vector<std::vector<std::size_t>> idx;
    std::vector<Tensor> xyz;
    struct Value {
      Tensor coords, feats;
      int level;
    };
    std::map<std::string, Value> values;

    std::vector<std::size_t> compose(int from, int to) const {
      auto c = idx[static_cast<std::size_t>(to)];
      for (int cur = impl->parent[static_cast<std::size_t>(to)]; cur != from; cur = impl->parent[static_cast<std::size_t>(cur)]) {
        for (auto& i : c) i = idx[static_cast<std::size_t>(cur)][i];
      }
      return c;
    }

    Tensor fetch(const std::string& ref, int level) const {
      const auto r = parse_ref(ref);
      const auto& v = values.at(r.step);
      const Tensor& t = r.coords ? v.coords : v.feats;
      if (v.level == level) return t;
      return ops::gather_rows(t, compose(v.level, level));
    }

    Tensor feats(const std::vector<std::string>& refs, int level) const {
      std::vector<Tensor> parts;
      for (const auto& r : refs) parts.push_back(fetch(r, level));
      return parts.size() == 1 ? parts.front() : ops::concat(parts, 1);
    }

    int open_level(int parent_level, std::vector<std::size_t> selected) {
      const auto l = idx.size();
      xyz.push_back(ops::gather_rows(xyz[static_cast<std::size_t>(parent_level)], selected));
      idx.push_back(std::move(selected));
      return static_cast<int>(l);
    }
  };
};

Network::Network(NetworkSpec spec, std::uint64_t seed)
    : spec_(std::move(spec)), store_(std::make_unique<ParamStore>()), impl_(std::make_unique<Impl>()) {
  if (spec_.classes == 0) throw std::invalid_argument("network: classes must be positive");
  if (spec_.steps.empty()) throw std::invalid_argument("network: no steps");
  if (spec_.dropout < 0.0 || spec_.dropout >= 1.0) throw std::invalid_argument("network: dropout must be in [0, 1)");
  std::mt19937_64 rng(seed);
  std::map<std::string, Impl::Info> info{{"input", {0, 3, 3}}};
  std::size_t heads = 0, seg_heads = 0;

  auto lookup = [&](const std::string& ref, const std::string& step) -> std::pair<int, std::size_t> {
    const auto r = parse_ref(ref);
    auto it = info.find(r.step);
    if (it == info.end()) throw std::invalid_argument("step " + step + ": unknown reference '" + ref + "'");
    return {it->second.level, r.coords ? it->second.coord_w : it->second.feat_w};
  };
  auto sum_widths = [&](const std::vector<std::string>& refs, const std::string& step, std::vector<int>& levels) {
    std::size_t w = 0;
    for (const auto& r : refs) {
      auto [l, width] = lookup(r, step);
      levels.push_back(l);
      w += width;
    }
    return w;
  };
  auto layer_config = [&](const StepSpec& s, std::size_t c, std::size_t d) {
    SfagcConfig cfg;
    cfg.coord_in = c;
    cfg.feat_in = d;
    cfg.coord_out = s.coord == CoordUpdate::Identity ? c : s.co_out;
    cfg.feat_out = s.f_out;
    cfg.k = s.k;
    cfg.coord_update = s.coord;
    cfg.flags = spec_.flags;
    cfg.slope = spec_.slope;
    return cfg;
  };

  for (const auto& s : spec_.steps) {
    if (s.name == "input" || info.count(s.name)) throw std::invalid_argument("network: duplicate step name '" + s.name + "'");
    Impl::Step st;
    st.spec = s;
    StepWidths w{s.name, s.kind};
    const std::string prefix = s.name + ".";
    std::vector<int> levels;
    if (s.feats.empty() && s.kind != StepKind::SetAbstraction) {
      throw std::invalid_argument("step " + s.name + ": no input features");
    }
    const std::size_t f_in = sum_widths(s.feats, s.name, levels);

    switch (s.kind) {
      case StepKind::Sfagc:
      case StepKind::PoolScore:
      case StepKind::PoolFps: {
        if (s.f_out == 0) throw std::invalid_argument("step " + s.name + ": f_out missing");
        std::size_t c = f_in;
        if (s.coords.empty()) throw std::invalid_argument("step " + s.name + ": coords missing");
        if (s.coords != "feats") {
          auto [l, width] = lookup(s.coords, s.name);
          levels.push_back(l);
          c = width;
        }
        if (s.coord == CoordUpdate::Mlp && s.co_out == 0) throw std::invalid_argument("step " + s.name + ": co_out missing");
        st.level = impl_->deepest(levels, s.name);
        auto cfg = layer_config(s, c, f_in);
        w.co_in = c;
        w.f_in = f_in;
        w.co_out = cfg.coord_out_dim();
        w.f_out = s.f_out;
        if (s.kind == StepKind::Sfagc) {
          st.sfagc = SfagcParams(*store_, prefix, cfg, rng);
          st.out_level = st.level;
        } else {
          if (s.t == 0) throw std::invalid_argument("step " + s.name + ": t missing");
          PoolConfig pc;
          pc.kind = s.kind == StepKind::PoolScore ? PoolKind::Score : PoolKind::Fps;
          pc.t = s.t;
          pc.coords_from_feats = s.coords == "feats";
          pc.fps_start = spec_.fps_start;
          pc.branch = cfg;
          pc.slope = spec_.slope;
          st.pool = PoolParams(*store_, prefix, pc, rng);
          impl_->parent.push_back(st.level);
          st.out_level = static_cast<int>(impl_->parent.size()) - 1;
        }
        info[s.name] = {st.out_level, w.co_out, w.f_out};
        break;
      }
      case StepKind::SetAbstraction: {
        if (s.coords.empty()) throw std::invalid_argument("step " + s.name + ": coords missing");
        auto [l, c] = lookup(s.coords, s.name);
        st.level = l;
        SetAbstractionConfig sc;
        sc.centroids = s.centroids;
        sc.scales = s.scales;
        sc.in_dim = c;
        sc.fps_start = spec_.fps_start;
        sc.slope = spec_.slope;
        if (sc.centroids == 0) throw std::invalid_argument("step " + s.name + ": centroids missing");
        st.sa = SetAbstractionParams(*store_, prefix, sc, rng);
        impl_->parent.push_back(st.level);
        st.out_level = static_cast<int>(impl_->parent.size()) - 1;
        w.co_in = c;
        w.f_in = c;
        w.co_out = c;
        w.f_out = st.sa.out_dim();
        info[s.name] = {st.out_level, c, w.f_out};
        break;
      }
      case StepKind::Propagate: {
        if (s.f_out == 0) throw std::invalid_argument("step " + s.name + ": f_out missing");
        st.src_level = impl_->deepest(levels, s.name);
        if (s.to.empty()) throw std::invalid_argument("step " + s.name + ": destination missing");
        st.level = lookup(s.to, s.name).first;
        if (!impl_->is_ancestor(st.level, st.src_level) || st.level == st.src_level) {
          throw std::invalid_argument("step " + s.name + ": destination must be a finer level than the sources");
        }
        std::vector<int> skip_levels;
        const std::size_t skip_w = s.skip.empty() ? 0 : sum_widths(s.skip, s.name, skip_levels);
        for (int l : skip_levels) {
          if (!impl_->is_ancestor(l, st.level)) throw std::invalid_argument("step " + s.name + ": skip is coarser than the destination");
        }
        st.map = Dense(*store_, prefix + "W_fp", f_in + skip_w, s.f_out, false, rng);
        st.out_level = st.level;
        w.co_in = 3;
        w.f_in = f_in + skip_w;
        w.co_out = 3;
        w.f_out = s.f_out;
        info[s.name] = {st.out_level, 3, s.f_out};
        break;
      }
      case StepKind::Head:
      case StepKind::SegHead: {
        st.level = impl_->deepest(levels, s.name);
        const std::size_t hidden = s.hidden ? s.hidden : spec_.head_hidden;
        const std::size_t in = s.kind == StepKind::Head ? 2 * f_in : f_in;
        st.fc1 = Dense(*store_, prefix + "fc1", in, hidden, true, rng);
        st.fc2 = Dense(*store_, prefix + "fc2", hidden, spec_.classes, true, rng);
        st.out_level = st.level;
        w.f_in = f_in;
        w.f_out = spec_.classes;
        if (s.kind == StepKind::Head) {
          ++heads;
        } else {
          if (st.level != 0) throw std::invalid_argument("step " + s.name + ": per-point head must read full-resolution features");
          ++seg_heads;
        }
        info[s.name] = {st.out_level, 0, spec_.classes};
        break;
      }
    }
    widths_.push_back(w);
    impl_->steps.push_back(std::move(st));
  }
  if (spec_.task == "classify" && (heads == 0 || seg_heads != 0)) {
    throw std::invalid_argument("network: classification needs at least one head and no per-point head");
  }
  if (spec_.task == "segment" && (seg_heads != 1 || heads != 0)) {
    throw std::invalid_argument("network: segmentation needs exactly one per-point head");
  }
}

Network::Network(Network&&) noexcept = default;
Network& Network::operator=(Network&&) noexcept = default;
Network::~Network() = default;

NetworkOutput Network::forward(Context& ctx, const Tensor& xyz) const {
  if (xyz.rank() != 2 || xyz.cols() != 3) throw DimensionError("network: input must be N x 3, got " + shape_string(xyz.shape()));
  Impl::Runtime rt{impl_.get(), {{}}, {xyz}, {}};
  rt.values["input"] = {xyz, xyz, 0};
  NetworkOutput out;
  const double slope = spec_.slope;

  for (const auto& st : impl_->steps) {
    const auto& s = st.spec;
    switch (s.kind) {
      case StepKind::Sfagc: {
        Tensor f = rt.feats(s.feats, st.level);
        Tensor c = s.coords == "feats" ? f : rt.fetch(s.coords, st.level);
        auto o = sfagc_forward(ctx, PointSet(c, f), st.sfagc);
        rt.values[s.name] = {o.coords, o.feats, st.level};
        break;
      }
      case StepKind::PoolScore:
      case StepKind::PoolFps: {
        Tensor f = rt.feats(s.feats, st.level);
        Tensor c = s.coords == "feats" ? f : rt.fetch(s.coords, st.level);
        auto pooled = graph_pool(ctx, PointSet(c, f), st.pool);
        const int l = rt.open_level(st.level, std::move(pooled.index));
        rt.values[s.name] = {pooled.points.coords, pooled.points.feats, l};
        break;
      }
      case StepKind::SetAbstraction: {
        auto o = set_abstraction_msg(ctx, rt.fetch(s.coords, st.level), st.sa);
        const int l = rt.open_level(st.level, std::move(o.centroids));
        rt.values[s.name] = {o.points.coords, o.points.feats, l};
        break;
      }
      case StepKind::Propagate: {
        Tensor src = rt.feats(s.feats, st.src_level);
        Tensor skip;
        if (!s.skip.empty()) skip = rt.feats(s.skip, st.level);
        const auto& src_xyz = rt.xyz[static_cast<std::size_t>(st.src_level)];
        const auto& dst_xyz = rt.xyz[static_cast<std::size_t>(st.level)];
        Tensor f = feature_propagation(ctx, src_xyz, src, dst_xyz, s.skip.empty() ? nullptr : &skip, &st.map, {}, slope);
        rt.values[s.name] = {dst_xyz, f, st.level};
        break;
      }
      case StepKind::Head: {
        Tensor f = rt.feats(s.feats, st.level);
        Tensor pooled = ops::concat({ops::reduce_rows(f, ops::Reduce::Max), ops::reduce_rows(f, ops::Reduce::Mean)}, 1);
        Tensor hidden = dropout(ctx, ops::leaky_relu(st.fc1(ctx, pooled), slope), spec_.dropout);
        out.phase_logits.push_back(st.fc2(ctx, hidden));
        break;
      }
      case StepKind::SegHead: {
        Tensor f = rt.feats(s.feats, st.level);
        Tensor hidden = dropout(ctx, ops::leaky_relu(st.fc1(ctx, f), slope), spec_.dropout);
        out.phase_logits.push_back(st.fc2(ctx, hidden));
        break;
      }
    }
  }
  out.logits = out.phase_logits.front();
  for (std::size_t i = 1; i < out.phase_logits.size(); ++i) out.logits = ops::add(out.logits, out.phase_logits[i]);
  return out;
}

Tensor hierarchical_loss(const std::vector<Tensor>& phase_losses) {
  if (phase_losses.empty()) throw std::invalid_argument("hierarchical_loss: no phases");
  Tensor total = phase_losses.front();
  for (std::size_t i = 1; i < phase_losses.size(); ++i) total = ops::add(total, phase_losses[i]);
  return total;
}

Tensor classification_loss(const NetworkOutput& out, std::size_t label) {
  std::vector<Tensor> losses;
  for (const auto& p : out.phase_logits) losses.push_back(ops::cross_entropy(p, label));
  return hierarchical_loss(losses);
}

Tensor segmentation_loss(const NetworkOutput& out, std::span<const std::size_t> labels) {
  return ops::cross_entropy_rows(out.logits, labels);
}

std::size_t argmax(std::span<const double> row) {
  if (row.empty()) throw std::invalid_argument("argmax: empty row");
  return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

std::vector<std::size_t> argmax_rows(const Tensor& logits) {
  const std::size_t r = logits.rows(), c = logits.cols();
  std::vector<std::size_t> out(r);
  for (std::size_t i = 0; i < r; ++i) out[i] = argmax(logits.values().subspan(i * c, c));
  return out;
}

}  // namespace sfagc
