#include "persearch/model.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "persearch/rng.hpp"

namespace persearch {

using nlohmann::json;

ModelParams::ModelParams(int d_app, int d_emb, uint64_t seed)
    : trunk("trunk", d_emb, d_app),
      det_head("det_head", 1, d_emb),
      reid_head("reid_head", d_emb, d_emb),
      dom_img("dom_img", 1, d_emb),
      dom_det("dom_det", 1, d_emb),
      dom_reid("dom_reid", 1, d_emb) {
  auto rng = substream(seed, "init");
  trunk.init_random(rng, 0.4);
  // small positive bias keeps ReLU units alive at init
  for (double& b : trunk.b) b = 0.1;
  det_head.init_random(rng, 0.3);
  reid_head.init_random(rng, 0.4);
  dom_img.init_random(rng, 0.3);
  dom_det.init_random(rng, 0.3);
  dom_reid.init_random(rng, 0.3);
}

std::vector<DenseParams*> ModelParams::all_blocks() {
  return {&trunk, &det_head, &reid_head, &dom_img, &dom_det, &dom_reid};
}

void ModelParams::zero_grad() {
  for (DenseParams* p : all_blocks()) p->zero_grad();
}

void ModelParams::step(const SgdConfig& cfg, double lr) {
  for (DenseParams* p : all_blocks()) sgd_step(*p, cfg, lr);
}

TrunkCache trunk_forward(const DenseParams& trunk, Vec x) {
  TrunkCache c;
  c.h = affine_forward(trunk, x);
  c.f = c.h;
  for (double& v : c.f) v = v > 0 ? v : 0.0;
  c.x = std::move(x);
  return c;
}

void trunk_backward(DenseParams& trunk, const TrunkCache& c, const Vec& df) {
  Vec dh(df.size());
  for (size_t i = 0; i < df.size(); ++i) dh[i] = c.h[i] > 0 ? df[i] : 0.0;
  affine_backward(trunk, c.x, dh);
}

ReidCache reid_forward(ModelParams& m, Vec raw) {
  ReidCache c;
  c.tc = trunk_forward(m.trunk, std::move(raw));
  // The embedding neck taps pre-activation trunk features. Rectified features
  // live in the nonnegative orthant, which puts a floor of roughly 0.5 on the
  // cosine between unrelated embeddings and leaves density clustering nothing
  // to separate; the pre-activation features are centred across inputs.
  c.z = affine_forward(m.reid_head, c.tc.h);
  c.znorm = norm(c.z);
  if (c.znorm < 1e-12) throw NumericalError("reid_forward: zero embedding");
  c.e = scaled(c.z, 1.0 / c.znorm);
  return c;
}

void reid_backward(ModelParams& m, const ReidCache& c, const Vec& de) {
  // d(z/|z|) = (I - e e^T)/|z| de
  Vec dz(de.size());
  const double proj = dot(c.e, de);
  for (size_t i = 0; i < de.size(); ++i)
    dz[i] = (de[i] - proj * c.e[i]) / c.znorm;
  const Vec dh = affine_backward(m.reid_head, c.tc.h, dz);
  affine_backward(m.trunk, c.tc.x, dh);
}

double det_confidence(const ModelParams& m, const TrunkCache& c) {
  return logistic(affine_forward(m.det_head, c.f)[0]);
}

void det_backward(ModelParams& m, const TrunkCache& c, double dlogit) {
  const Vec df = affine_backward(m.det_head, c.f, Vec{dlogit});
  trunk_backward(m.trunk, c, df);
}

static json block_to_json(const DenseParams& p) {
  return json{{"name", p.name},
              {"out", p.out_dim()},
              {"in", p.in_dim()},
              {"W", p.W.a},
              {"b", p.b}};
}

static void block_from_json(const json& j, DenseParams& p) {
  p = DenseParams(j.at("name").get<std::string>(), j.at("out").get<int>(),
                  j.at("in").get<int>());
  p.W.a = j.at("W").get<std::vector<double>>();
  p.b = j.at("b").get<Vec>();
}

void save_checkpoint(const ModelParams& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot write " + path);
  ModelParams& mm = const_cast<ModelParams&>(m);
  for (DenseParams* p : mm.all_blocks()) out << block_to_json(*p).dump() << "\n";
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot read " + path);
  ModelParams m;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw std::runtime_error("checkpoint line " + std::to_string(lineno) +
                               ": " + e.what());
    }
    const std::string name = j.at("name").get<std::string>();
    if (name == "trunk") block_from_json(j, m.trunk);
    else if (name == "det_head") block_from_json(j, m.det_head);
    else if (name == "reid_head") block_from_json(j, m.reid_head);
    else if (name == "dom_img") block_from_json(j, m.dom_img);
    else if (name == "dom_det") block_from_json(j, m.dom_det);
    else if (name == "dom_reid") block_from_json(j, m.dom_reid);
    else
      throw std::runtime_error("checkpoint line " + std::to_string(lineno) +
                               ": unknown block '" + name + "'");
  }
  return m;
}

}  // namespace persearch
