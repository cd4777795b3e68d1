#include "lmp/nn.hpp"

#include <cmath>

#include "lmp/error.hpp"

namespace lmp::nn {

Param& ParamStore::create(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
  if (by_name_.count(name)) raise(ErrorCode::InvalidConfig, "duplicate parameter " + name);
  auto p = std::make_unique<Param>();
  p->name = name;
  p->value = Mat::Zero(rows, cols);
  Param& ref = *p;
  by_name_[name] = p.get();
  params_.push_back(std::move(p));
  return ref;
}

Param* ParamStore::find(const std::string& name) {
  auto it = by_name_.find(name);
  return it == by_name_.end() ? nullptr : it->second;
}

const Param* ParamStore::find(const std::string& name) const {
  auto it = by_name_.find(name);
  return it == by_name_.end() ? nullptr : it->second;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p->value.size());
  return n;
}

void ParamStore::reset_adam_state() {
  for (auto& p : params_) {
    p->m.resize(0, 0);
    p->v.resize(0, 0);
  }
}

Var Graph::use(Param& p) {
  auto it = index_.find(&p);
  if (it != index_.end()) return bindings_[it->second].second;
  Var v = tape_->leaf(p.value);
  index_[&p] = static_cast<int>(bindings_.size());
  bindings_.emplace_back(&p, v);
  return v;
}

Var activate(Var x, Act act) {
  switch (act) {
    case Act::None: return x;
    case Act::Tanh: return ad::tanh_(x);
    case Act::Gelu: return ad::gelu(x);
  }
  return x;
}

namespace {

Mat xavier(Eigen::Index in, Eigen::Index out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  Mat w(in, out);
  for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = rng.uniform(-limit, limit);
  return w;
}

}  // namespace

Linear Linear::create(ParamStore& store, const std::string& name, Eigen::Index in,
                      Eigen::Index out, Rng& rng) {
  Linear l;
  l.W = &store.create(name + ".W", in, out);
  l.W->value = xavier(in, out, rng);
  l.b = &store.create(name + ".b", 1, out);
  return l;
}

Var Linear::operator()(Graph& g, Var x) const {
  return ad::row_broadcast_add(ad::matmul(x, g.use(*W)), g.use(*b));
}

LayerNorm LayerNorm::create(ParamStore& store, const std::string& name, Eigen::Index d) {
  LayerNorm ln;
  ln.gain = &store.create(name + ".g", 1, d);
  ln.gain->value.setOnes();
  ln.bias = &store.create(name + ".b", 1, d);
  return ln;
}

Var LayerNorm::operator()(Graph& g, Var x) const {
  return ad::row_broadcast_add(ad::row_broadcast_mul(ad::layer_norm_rows(x), g.use(*gain)),
                               g.use(*bias));
}

Mlp Mlp::create(ParamStore& store, const std::string& name, Eigen::Index in,
                const std::vector<Eigen::Index>& hidden, Eigen::Index out, Act act, Rng& rng) {
  Mlp mlp;
  mlp.act = act;
  Eigen::Index prev = in;
  int li = 0;
  for (Eigen::Index h : hidden) {
    mlp.layers.push_back(Linear::create(store, name + ".l" + std::to_string(li++), prev, h, rng));
    prev = h;
  }
  mlp.layers.push_back(Linear::create(store, name + ".l" + std::to_string(li), prev, out, rng));
  return mlp;
}

Var Mlp::operator()(Graph& g, Var x) const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    x = layers[i](g, x);
    if (i + 1 < layers.size()) x = activate(x, act);
  }
  return x;
}

MultiHeadAttention MultiHeadAttention::create(ParamStore& store, const std::string& name,
                                              Eigen::Index d, int heads, Rng& rng) {
  if (heads < 1 || d % heads != 0) {
    raise(ErrorCode::InvalidConfig, "attention width must be divisible by head count");
  }
  MultiHeadAttention a;
  a.heads = heads;
  a.wq = Linear::create(store, name + ".wq", d, d, rng);
  a.wk = Linear::create(store, name + ".wk", d, d, rng);
  a.wv = Linear::create(store, name + ".wv", d, d, rng);
  a.wo = Linear::create(store, name + ".wo", d, d, rng);
  return a;
}

Var MultiHeadAttention::operator()(Graph& g, Var queries, Var context) const {
  const Eigen::Index d = queries.cols();
  const Eigen::Index dk = d / heads;
  Var q = wq(g, queries);
  Var k = wk(g, context);
  Var v = wv(g, context);
  Var merged;
  for (int h = 0; h < heads; ++h) {
    Var qh = ad::slice_cols(q, h * dk, dk);
    Var kh = ad::slice_cols(k, h * dk, dk);
    Var vh = ad::slice_cols(v, h * dk, dk);
    Var scores = ad::scale(ad::matmul_nt(qh, kh), 1.0 / std::sqrt(static_cast<double>(dk)));
    Var attn = ad::softmax_rows(scores);
    Var out = ad::matmul(attn, vh);
    merged = h == 0 ? out : ad::concat_cols(merged, out);
  }
  return wo(g, merged);
}

EncoderLayer EncoderLayer::create(ParamStore& store, const std::string& name, Eigen::Index d,
                                  int heads, Eigen::Index ff_width, Rng& rng) {
  EncoderLayer layer;
  layer.ln1 = LayerNorm::create(store, name + ".ln1", d);
  layer.attn = MultiHeadAttention::create(store, name + ".attn", d, heads, rng);
  layer.ln2 = LayerNorm::create(store, name + ".ln2", d);
  layer.ff = Mlp::create(store, name + ".ff", d, {ff_width}, d, Act::Gelu, rng);
  return layer;
}

Var EncoderLayer::operator()(Graph& g, Var x) const {
  Var h = ln1(g, x);
  x = ad::add(x, attn(g, h, h));
  x = ad::add(x, ff(g, ln2(g, x)));
  return x;
}

QueryLayer QueryLayer::create(ParamStore& store, const std::string& name, Eigen::Index d,
                              int heads, Eigen::Index ff_width, Rng& rng) {
  QueryLayer layer;
  layer.ln_self = LayerNorm::create(store, name + ".lns", d);
  layer.self_attn = MultiHeadAttention::create(store, name + ".self", d, heads, rng);
  layer.ln_cross = LayerNorm::create(store, name + ".lnc", d);
  layer.cross_attn = MultiHeadAttention::create(store, name + ".cross", d, heads, rng);
  layer.ln_ff = LayerNorm::create(store, name + ".lnf", d);
  layer.ff = Mlp::create(store, name + ".ff", d, {ff_width}, d, Act::Gelu, rng);
  return layer;
}

Var QueryLayer::operator()(Graph& g, Var q, Var memory) const {
  Var h = ln_self(g, q);
  q = ad::add(q, self_attn(g, h, h));
  q = ad::add(q, cross_attn(g, ln_cross(g, q), memory));
  q = ad::add(q, ff(g, ln_ff(g, q)));
  return q;
}

SeqToSet SeqToSet::create(ParamStore& store, const std::string& name, Eigen::Index d, int m,
                          int layers, int heads, Eigen::Index ff_width, Rng& rng) {
  SeqToSet s;
  for (int i = 0; i < layers; ++i) {
    s.enc_layers.push_back(
        EncoderLayer::create(store, name + ".enc" + std::to_string(i), d, heads, ff_width, rng));
  }
  s.queries = &store.create(name + ".queries", m, d);
  s.queries->value = xavier(m, d, rng);
  for (int i = 0; i < layers; ++i) {
    s.query_layers.push_back(
        QueryLayer::create(store, name + ".qry" + std::to_string(i), d, heads, ff_width, rng));
  }
  s.final_ln = LayerNorm::create(store, name + ".lnout", d);
  return s;
}

Var SeqToSet::operator()(Graph& g, Var tokens) const {
  Var x = tokens;
  for (const auto& layer : enc_layers) x = layer(g, x);
  Var q = g.use(*queries);
  for (const auto& layer : query_layers) q = layer(g, q, x);
  return final_ln(g, q);
}

void Adam::update(Param& p, const Mat& g, double lr, double c1, double c2) {
  if (p.m.size() == 0) {
    p.m = Mat::Zero(p.value.rows(), p.value.cols());
    p.v = Mat::Zero(p.value.rows(), p.value.cols());
  }
  p.m = beta1_ * p.m + (1.0 - beta1_) * g;
  p.v = beta2_ * p.v + (1.0 - beta2_) * g.cwiseProduct(g);
  const Mat mhat = p.m / c1;
  const Mat vhat = p.v / c2;
  p.value.array() -= lr * mhat.array() / (vhat.array().sqrt() + eps_);
}

void Adam::step(Graph& graph, double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (auto& [param, var] : graph.bindings()) {
    const Mat& g = var.grad();
    if (g.size() == 0) continue;  // parameter did not influence the loss
    update(*param, g, lr, c1, c2);
  }
}

void Adam::step(const std::vector<std::pair<Param*, Mat>>& grads, double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (auto& [param, g] : grads) {
    if (g.size() == 0) continue;
    update(*param, g, lr, c1, c2);
  }
}

}  // namespace lmp::nn
