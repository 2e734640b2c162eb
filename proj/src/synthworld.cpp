#include "persearch/synthworld.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "persearch/rng.hpp"

namespace persearch {

using nlohmann::json;

double quantize9(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return std::strtod(buf, nullptr);
}

static Vec quantized(Vec v) {
  for (double& x : v) x = quantize9(x);
  return v;
}

void WorldConfig::validate() const {
  if (d_app < 2) throw ConfigError("world: d_app must be >= 2");
  if (n_source_ids < 1 || n_target_ids < 1)
    throw ConfigError("world: identity counts must be >= 1");
  if (n_source_scenes < 1 || n_target_scenes < 1 || n_test_scenes < 1)
    throw ConfigError("world: scene counts must be >= 1");
  if (min_instances < 0 || max_instances < min_instances)
    throw ConfigError("world: bad instance count range");
  if (canvas_w <= 0 || canvas_h <= 0) throw ConfigError("world: bad canvas");
  if (sigma_source < 0 || sigma_target < 0)
    throw ConfigError("world: sigma must be >= 0");
  if (target_mix < 0 || target_mix >= 1)
    throw ConfigError("world: target_mix must be in [0,1)");
  if (texture_gap < 0 || texture_gap > 1)
    throw ConfigError("world: texture_gap must be in [0,1]");
  if (texture_jitter < 0)
    throw ConfigError("world: texture_jitter must be >= 0");
  if (id_novelty < 0 || id_novelty > 1)
    throw ConfigError("world: id_novelty must be in [0,1]");
  if (n_queries < 1) throw ConfigError("world: n_queries must be >= 1");
}

static Vec random_unit(std::mt19937_64& rng, int d) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vec v(d);
  for (double& x : v) x = g(rng);
  return normalized(v);
}

// Random orthogonal matrix via Gram-Schmidt on a Gaussian matrix.
static Mat random_orthogonal(std::mt19937_64& rng, int d) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<Vec> rows;
  while (static_cast<int>(rows.size()) < d) {
    Vec v(d);
    for (double& x : v) x = g(rng);
    for (const Vec& r : rows) axpy(-dot(v, r), r, v);
    if (norm(v) < 1e-6) continue;
    rows.push_back(normalized(v));
  }
  Mat q(d, d);
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) q(r, c) = rows[r][c];
  return q;
}

static DomainModel make_domain_model(const WorldConfig& cfg, int domain,
                                     std::mt19937_64& rng) {
  const int d = cfg.d_app;
  DomainModel m;
  m.domain = domain;
  m.sigma = domain == 0 ? cfg.sigma_source : cfg.sigma_target;
  m.box_mean = domain == 0 ? cfg.box_mean_source : cfg.box_mean_target;
  m.box_spread = cfg.box_spread;
  m.texture = quantized(scaled(random_unit(rng, d), cfg.texture_scale));
  m.texture_jitter = cfg.texture_jitter;
  if (domain == 0) {
    m.appearance_map = Mat::identity(d);
    m.appearance_shift = Vec(d, 0.0);
  } else {
    const Mat q = random_orthogonal(rng, d);
    Mat a(d, d);
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c)
        a(r, c) = quantize9((1.0 - cfg.target_mix) * (r == c ? 1.0 : 0.0) +
                            cfg.target_mix * q(r, c));
    m.appearance_map = a;
    m.appearance_shift = quantized(
        scaled(random_unit(rng, d), cfg.target_shift));
    // singular values of (1-mix)I + mix*Q are >= 1-mix > 0, but verify
    Mat chk = a;
    Vec e(d, 0.0);
    e[0] = 1.0;
    solve_linear(chk, e);
  }
  return m;
}

static Box sample_box(const WorldConfig& cfg, const DomainModel& m,
                      std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int attempt = 0; attempt < 64; ++attempt) {
    const double w = m.box_mean * std::exp(m.box_spread * g(rng));
    const double h = m.box_mean * 1.8 * std::exp(m.box_spread * g(rng));
    if (w >= cfg.canvas_w || h >= cfg.canvas_h) continue;
    const double x1 = u(rng) * (cfg.canvas_w - w);
    const double y1 = u(rng) * (cfg.canvas_h - h);
    Box b{quantize9(x1), quantize9(y1), quantize9(x1 + w), quantize9(y1 + h)};
    if (b.valid()) return b;
  }
  throw NumericalError("sample_box: failed to draw a valid box");
}

static Scene make_scene(const WorldConfig& cfg, const DomainModel& model,
                        const IdentityBank& bank, int scene_id,
                        const std::vector<int>& identity_pool,
                        std::mt19937_64& rng, int forced_identity = -1) {
  std::uniform_int_distribution<int> count_d(cfg.min_instances,
                                             cfg.max_instances);
  std::uniform_int_distribution<int> id_d(
      0, static_cast<int>(identity_pool.size()) - 1);
  std::normal_distribution<double> g(0.0, 1.0);

  Scene s;
  s.id = scene_id;
  s.domain = model.domain;
  s.w = cfg.canvas_w;
  s.h = cfg.canvas_h;

  int n = count_d(rng);
  if (forced_identity >= 0 && n < 1) n = 1;
  std::vector<int> ids;
  for (int k = 0; k < n; ++k)
    ids.push_back(k == 0 && forced_identity >= 0 ? forced_identity
                                                 : identity_pool[id_d(rng)]);
  for (int id : ids) {
    Instance inst;
    inst.identity = id;
    // keep instances separated: overlapping persons blend appearances in the
    // rendered crops, which bridges otherwise distinct identities
    for (int attempt = 0; attempt < 64; ++attempt) {
      inst.box = sample_box(cfg, model, rng);
      bool ok = true;
      for (const Instance& other : s.instances)
        if (iou(inst.box, other.box) > 0.05) ok = false;
      if (ok) break;
    }
    const Vec& u = bank.latents.at(id);
    // The domain shift is a whole-image style offset applied at render time,
    // not part of the person's intrinsic appearance.
    Vec app = matvec(model.appearance_map, u);
    for (double& x : app) x += model.sigma * g(rng);
    inst.appearance = quantized(app);
    s.instances.push_back(std::move(inst));
  }

  std::uniform_int_distribution<int> distr_d(0, cfg.max_distractors);
  const int nd = distr_d(rng);
  for (int k = 0; k < nd; ++k) {
    Distractor d;
    d.box = sample_box(cfg, model, rng);
    Vec t = model.texture;
    for (double& x : t) x += 0.4 * g(rng);
    d.texture = quantized(scaled(normalized(t), cfg.texture_scale));
    s.distractors.push_back(std::move(d));
  }
  return s;
}

DatasetSnapshot generate_dataset(const WorldConfig& config, uint64_t seed) {
  config.validate();
  auto rng = substream(seed, "datagen");

  DatasetSnapshot snap;
  snap.config = config;

  std::vector<int> source_ids, target_ids;
  for (int i = 0; i < config.n_source_ids; ++i) source_ids.push_back(i);
  for (int i = 0; i < config.n_target_ids; ++i) target_ids.push_back(1000 + i);
  // Source identities are mutually orthogonal while dimensions last, so they
  // form well-separated appearance modes; chance alignment between iid
  // identity vectors would bridge clusters regardless of the learned
  // embedding. Target identities anchor to source appearance modes: new
  // people, drawn from the same visual population the source domain covers.
  // A source-trained trunk keeps exactly the directions that separate source
  // classes (weight decay prunes everything else), so anchored identities
  // remain separable after transfer. id_novelty blends in a fresh orthogonal
  // direction per identity: 0 keeps the target modes congruent with source
  // modes, 1 yields an unrelated population the trunk never had a reason to
  // preserve.
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto ortho_draw = [&](const std::vector<Vec>& span,
                        const std::vector<Vec>& avoid) {
    for (int attempt = 0; attempt < 24; ++attempt) {
      Vec v(config.d_app, 0.0);
      if (span.empty()) {
        for (double& x : v) x = gauss(rng);
      } else {
        for (const Vec& r : span) axpy(gauss(rng), r, v);
      }
      // orthogonalize against earlier draws while room remains; later
      // attempts relax the constraint so exhaustion cannot fail generation
      if (attempt < 12)
        for (const Vec& r : avoid) axpy(-dot(v, r), r, v);
      if (norm(v) < 1e-6) continue;
      return normalized(v);
    }
    throw NumericalError("generate_dataset: failed to draw identity vector");
  };
  std::vector<Vec> source_basis;
  for (int id : source_ids) {
    Vec u = ortho_draw({}, source_basis);
    source_basis.push_back(u);
    snap.bank.latents[id] = quantized(u);
  }
  std::vector<Vec> used = source_basis;  // novel parts avoid these too
  for (size_t k = 0; k < target_ids.size(); ++k) {
    Vec u = source_basis[k % source_basis.size()];
    // when anchors wrap around, force enough novelty to keep the two
    // identities sharing an anchor distinguishable
    const double nu = k < source_basis.size()
                          ? config.id_novelty
                          : std::max(config.id_novelty, 0.5);
    if (nu > 0) {
      Vec w = ortho_draw({}, used);
      used.push_back(w);
      u = scaled(u, 1.0 - nu);
      axpy(nu, w, u);
      u = normalized(u);
    }
    snap.bank.latents[target_ids[k]] = quantized(u);
  }

  snap.source_model = make_domain_model(config, 0, rng);
  snap.target_model = make_domain_model(config, 1, rng);
  // keep the background statistics correlated across domains so the
  // detector transfers partially; the appearance transform carries the gap
  {
    Vec t = scaled(snap.target_model.texture, config.texture_gap);
    axpy(1.0 - config.texture_gap, snap.source_model.texture, t);
    snap.target_model.texture =
        quantized(scaled(normalized(t), config.texture_scale));
  }
  // The domain shift models camera and lighting style, not identity: target
  // crops are tinted toward the target background texture. A source-trained
  // detector reads tinted people as background, while the identity-relevant
  // directions (projected out of the tint when the appearance space has
  // room) are left intact, so ranking survives the shift.
  if (config.target_shift > 0) {
    Vec r = normalized(snap.target_model.texture);
    for (const Vec& u : source_basis) axpy(-dot(r, u), u, r);
    const double rn = norm(r);
    if (rn > 1e-6)
      snap.target_model.appearance_shift =
          quantized(scaled(r, config.target_shift / rn));
  }

  int next_id = 0;
  for (int i = 0; i < config.n_source_scenes; ++i)
    snap.source_train.push_back(make_scene(config, snap.source_model,
                                           snap.bank, next_id++, source_ids,
                                           rng));
  for (int i = 0; i < config.n_target_scenes; ++i)
    snap.target_train.push_back(make_scene(config, snap.target_model,
                                           snap.bank, next_id++, target_ids,
                                           rng));
  // Round-robin forced identities so every target identity recurs across
  // the test gallery; queries need >= 2 scenes containing their identity.
  for (int i = 0; i < config.n_test_scenes; ++i) {
    const int forced = target_ids[i % target_ids.size()];
    snap.target_test.push_back(make_scene(config, snap.target_model, snap.bank,
                                          next_id++, target_ids, rng, forced));
  }

  // queries: identities appearing in >= 2 test scenes
  std::map<int, std::vector<std::pair<int, int>>> where;  // id -> (scene, idx)
  for (const Scene& s : snap.target_test)
    for (size_t k = 0; k < s.instances.size(); ++k)
      where[s.instances[k].identity].emplace_back(s.id, static_cast<int>(k));
  for (const auto& [id, occ] : where) {
    std::map<int, int> per_scene;
    for (auto& [sid, _] : occ) per_scene[sid]++;
    if (per_scene.size() < 2) continue;
    snap.queries.push_back(QueryRef{occ.front().first, occ.front().second});
    if (static_cast<int>(snap.queries.size()) >= config.n_queries) break;
  }
  if (snap.queries.empty())
    throw ConfigError("generate_dataset: no identity spans two test scenes");
  return snap;
}

// Background clutter varies from scene to scene: the domain texture is bent
// by a fixed per-scene direction, so partially framed boxes in different
// scenes do not all share one global background component. Derived
// deterministically from the scene id, so it is stable across epochs and
// needs no extra state in the snapshot.
static Vec scene_texture(const Scene& scene, const DomainModel& model) {
  if (model.texture_jitter <= 0.0) return model.texture;
  const double s = norm(model.texture);
  if (s < 1e-12) return model.texture;
  auto rng = substream(fnv1a("scene-texture"),
                       std::to_string(scene.domain),
                       static_cast<uint64_t>(scene.id));
  Vec t = scaled(model.texture, 1.0 / s);
  axpy(model.texture_jitter, random_unit(rng, static_cast<int>(t.size())), t);
  return scaled(normalized(t), s);
}

Vec render_roi_feature(const Scene& scene, const DomainModel& model,
                       const Box& box, double noise_scale,
                       uint64_t render_seed) {
  const int d = static_cast<int>(model.texture.size());
  const Vec bg = scene_texture(scene, model);
  Vec f(d, 0.0);
  // Occupants contribute in proportion to how well the box frames them (IOU),
  // so badly-aligned boxes read mostly as background; texture fills the rest.
  double max_cov = 0.0;
  for (const Instance& inst : scene.instances) {
    const double s = iou(box, inst.box);
    if (s > 0) axpy(s, inst.appearance, f);
    max_cov = std::max(max_cov, s);
  }
  for (const Distractor& dist : scene.distractors) {
    const double s = iou(box, dist.box);
    if (s > 0) axpy(s, dist.texture, f);
    max_cov = std::max(max_cov, s);
  }
  axpy(1.0 - max_cov, bg, f);
  // Camera/lighting style offset: every crop from this domain carries it,
  // background and person alike.
  if (!model.appearance_shift.empty())
    axpy(1.0, model.appearance_shift, f);
  if (noise_scale > 0) {
    uint64_t h = splitmix64(render_seed ^ splitmix64(scene.id * 2654435761ULL));
    auto mix = [&h](double v) {
      uint64_t bits;
      static_assert(sizeof bits == sizeof v);
      std::memcpy(&bits, &v, sizeof bits);
      h = splitmix64(h ^ bits);
    };
    mix(box.x1);
    mix(box.y1);
    mix(box.x2);
    mix(box.y2);
    std::mt19937_64 rng(h);
    std::normal_distribution<double> g(0.0, 1.0);
    for (double& x : f) x += noise_scale * g(rng);
  }
  return f;
}

std::vector<Vec> render_patch_features(const Scene& scene,
                                       const DomainModel& model, int grid,
                                       double noise_scale,
                                       uint64_t render_seed) {
  if (grid < 1) throw ConfigError("render_patch_features: grid must be >= 1");
  std::vector<Vec> out;
  out.reserve(static_cast<size_t>(grid) * grid);
  const double pw = scene.w / grid, ph = scene.h / grid;
  for (int gy = 0; gy < grid; ++gy)
    for (int gx = 0; gx < grid; ++gx) {
      Box cell{gx * pw, gy * ph, (gx + 1) * pw, (gy + 1) * ph};
      out.push_back(
          render_roi_feature(scene, model, cell, noise_scale, render_seed));
    }
  return out;
}

// ---- serialization ----

static json vec_to_json(const Vec& v) { return json(v); }
static Vec vec_from_json(const json& j) { return j.get<Vec>(); }

static json mat_to_json(const Mat& m) {
  return json{{"rows", m.rows}, {"cols", m.cols}, {"a", m.a}};
}
static Mat mat_from_json(const json& j) {
  Mat m(j.at("rows").get<int>(), j.at("cols").get<int>());
  m.a = j.at("a").get<std::vector<double>>();
  return m;
}

static json model_to_json(const DomainModel& m) {
  return json{{"domain", m.domain},
              {"A", mat_to_json(m.appearance_map)},
              {"b", m.appearance_shift},
              {"sigma", m.sigma},
              {"texture", m.texture},
              {"texture_jitter", m.texture_jitter},
              {"box_mean", m.box_mean},
              {"box_spread", m.box_spread}};
}
static DomainModel model_from_json(const json& j) {
  DomainModel m;
  m.domain = j.at("domain").get<int>();
  m.appearance_map = mat_from_json(j.at("A"));
  m.appearance_shift = vec_from_json(j.at("b"));
  m.sigma = j.at("sigma").get<double>();
  m.texture = vec_from_json(j.at("texture"));
  m.texture_jitter = j.value("texture_jitter", 0.0);
  m.box_mean = j.at("box_mean").get<double>();
  m.box_spread = j.at("box_spread").get<double>();
  return m;
}

static json config_to_json(const WorldConfig& c) {
  return json{{"n_source_scenes", c.n_source_scenes},
              {"n_target_scenes", c.n_target_scenes},
              {"n_test_scenes", c.n_test_scenes},
              {"n_queries", c.n_queries},
              {"n_source_ids", c.n_source_ids},
              {"n_target_ids", c.n_target_ids},
              {"min_instances", c.min_instances},
              {"max_instances", c.max_instances},
              {"d_app", c.d_app},
              {"canvas_w", c.canvas_w},
              {"canvas_h", c.canvas_h},
              {"sigma_source", c.sigma_source},
              {"sigma_target", c.sigma_target},
              {"target_mix", c.target_mix},
              {"target_shift", c.target_shift},
              {"box_mean_source", c.box_mean_source},
              {"box_mean_target", c.box_mean_target},
              {"box_spread", c.box_spread},
              {"texture_scale", c.texture_scale},
              {"texture_jitter", c.texture_jitter},
              {"texture_gap", c.texture_gap},
              {"id_novelty", c.id_novelty},
              {"max_distractors", c.max_distractors}};
}
static WorldConfig config_from_json(const json& j) {
  WorldConfig c;
  j.at("n_source_scenes").get_to(c.n_source_scenes);
  j.at("n_target_scenes").get_to(c.n_target_scenes);
  j.at("n_test_scenes").get_to(c.n_test_scenes);
  j.at("n_queries").get_to(c.n_queries);
  j.at("n_source_ids").get_to(c.n_source_ids);
  j.at("n_target_ids").get_to(c.n_target_ids);
  j.at("min_instances").get_to(c.min_instances);
  j.at("max_instances").get_to(c.max_instances);
  j.at("d_app").get_to(c.d_app);
  j.at("canvas_w").get_to(c.canvas_w);
  j.at("canvas_h").get_to(c.canvas_h);
  j.at("sigma_source").get_to(c.sigma_source);
  j.at("sigma_target").get_to(c.sigma_target);
  j.at("target_mix").get_to(c.target_mix);
  j.at("target_shift").get_to(c.target_shift);
  j.at("box_mean_source").get_to(c.box_mean_source);
  j.at("box_mean_target").get_to(c.box_mean_target);
  j.at("box_spread").get_to(c.box_spread);
  j.at("texture_scale").get_to(c.texture_scale);
  c.texture_jitter = j.value("texture_jitter", 0.0);
  j.at("texture_gap").get_to(c.texture_gap);
  j.at("id_novelty").get_to(c.id_novelty);
  j.at("max_distractors").get_to(c.max_distractors);
  return c;
}

static json scene_to_json(const Scene& s, const char* split) {
  json instances = json::array();
  for (const Instance& i : s.instances)
    instances.push_back(json{
        {"identity", i.identity},
        {"box", {i.box.x1, i.box.y1, i.box.x2, i.box.y2}},
        {"appearance", i.appearance}});
  json distractors = json::array();
  for (const Distractor& d : s.distractors)
    distractors.push_back(json{{"box", {d.box.x1, d.box.y1, d.box.x2, d.box.y2}},
                               {"texture", d.texture}});
  return json{{"id", s.id},     {"domain", s.domain},
              {"w", s.w},       {"h", s.h},
              {"instances", instances}, {"distractors", distractors},
              {"split", split}};
}
static Box box_from_json(const json& j) {
  return Box{j.at(0).get<double>(), j.at(1).get<double>(),
             j.at(2).get<double>(), j.at(3).get<double>()};
}
static Scene scene_from_json(const json& j) {
  Scene s;
  s.id = j.at("id").get<int>();
  s.domain = j.at("domain").get<int>();
  s.w = j.at("w").get<double>();
  s.h = j.at("h").get<double>();
  for (const json& ij : j.at("instances")) {
    Instance i;
    i.identity = ij.at("identity").get<int>();
    i.box = box_from_json(ij.at("box"));
    i.appearance = vec_from_json(ij.at("appearance"));
    s.instances.push_back(std::move(i));
  }
  for (const json& dj : j.at("distractors")) {
    Distractor d;
    d.box = box_from_json(dj.at("box"));
    d.texture = vec_from_json(dj.at("texture"));
    s.distractors.push_back(std::move(d));
  }
  return s;
}

std::string snapshot_to_string(const DatasetSnapshot& snap) {
  std::ostringstream out;
  json bank = json::object();
  for (const auto& [id, v] : snap.bank.latents) bank[std::to_string(id)] = v;
  json queries = json::array();
  for (const QueryRef& q : snap.queries)
    queries.push_back(json{{"scene", q.scene_id}, {"instance", q.instance_idx}});
  json header{{"type", "header"},
              {"d_app", snap.config.d_app},
              {"config", config_to_json(snap.config)},
              {"source_model", model_to_json(snap.source_model)},
              {"target_model", model_to_json(snap.target_model)},
              {"bank", bank},
              {"queries", queries}};
  out << header.dump() << "\n";
  for (const Scene& s : snap.source_train)
    out << scene_to_json(s, "source_train").dump() << "\n";
  for (const Scene& s : snap.target_train)
    out << scene_to_json(s, "target_train").dump() << "\n";
  for (const Scene& s : snap.target_test)
    out << scene_to_json(s, "target_test").dump() << "\n";
  return out.str();
}

DatasetSnapshot snapshot_from_string(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  DatasetSnapshot snap;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError("snapshot line " + std::to_string(lineno) + ": " +
                       e.what());
    }
    try {
      if (!have_header) {
        if (j.value("type", "") != "header")
          throw ParseError("snapshot line 1: expected header");
        snap.config = config_from_json(j.at("config"));
        snap.source_model = model_from_json(j.at("source_model"));
        snap.target_model = model_from_json(j.at("target_model"));
        for (auto& [key, v] : j.at("bank").items())
          snap.bank.latents[std::stoi(key)] = vec_from_json(v);
        for (const json& qj : j.at("queries"))
          snap.queries.push_back(QueryRef{qj.at("scene").get<int>(),
                                          qj.at("instance").get<int>()});
        have_header = true;
      } else {
        const std::string split = j.at("split").get<std::string>();
        Scene s = scene_from_json(j);
        if (split == "source_train")
          snap.source_train.push_back(std::move(s));
        else if (split == "target_train")
          snap.target_train.push_back(std::move(s));
        else if (split == "target_test")
          snap.target_test.push_back(std::move(s));
        else
          throw ParseError("unknown split '" + split + "'");
      }
    } catch (const json::exception& e) {
      throw ParseError("snapshot line " + std::to_string(lineno) + ": " +
                       e.what());
    }
  }
  if (!have_header) throw ParseError("snapshot line 1: missing header");
  return snap;
}

void save_snapshot(const DatasetSnapshot& snap, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_snapshot: cannot write " + path);
  out << snapshot_to_string(snap);
}

DatasetSnapshot load_snapshot(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_snapshot: cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return snapshot_from_string(buf.str());
}

double linear_probe_accuracy(const std::vector<Vec>& features,
                             const std::vector<int>& labels, double train_frac,
                             double ridge) {
  if (features.size() != labels.size() || features.empty())
    throw ConfigError("linear_probe_accuracy: bad inputs");
  const int d = static_cast<int>(features[0].size()) + 1;  // + bias
  const size_t n_train =
      std::max<size_t>(1, static_cast<size_t>(train_frac * features.size()));
  Mat gram(d, d);
  Vec rhs(d, 0.0);
  for (size_t i = 0; i < n_train; ++i) {
    Vec x = features[i];
    x.push_back(1.0);
    const double y = labels[i] == 0 ? -1.0 : 1.0;
    for (int r = 0; r < d; ++r) {
      rhs[r] += x[r] * y;
      for (int c = 0; c < d; ++c) gram(r, c) += x[r] * x[c];
    }
  }
  for (int r = 0; r < d; ++r) gram(r, r) += ridge;
  const Vec w = solve_linear(gram, rhs);
  size_t correct = 0, total = 0;
  for (size_t i = n_train; i < features.size(); ++i) {
    Vec x = features[i];
    x.push_back(1.0);
    const int pred = dot(w, x) >= 0 ? 1 : 0;
    correct += (pred == labels[i]);
    ++total;
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / total;
}

}  // namespace persearch
