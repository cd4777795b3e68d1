#pragma once

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "lmp/rng.hpp"
#include "lmp/tape.hpp"

namespace lmp::nn {

using ad::Mat;
using ad::Tape;
using ad::Var;

struct Param {
  std::string name;
  Mat value;
  // Adam state
  Mat m;
  Mat v;
};

// Owns all trainable tensors of a model, in stable registration order.
class ParamStore {
 public:
  Param& create(const std::string& name, Eigen::Index rows, Eigen::Index cols);
  Param* find(const std::string& name);
  const Param* find(const std::string& name) const;
  const std::vector<std::unique_ptr<Param>>& all() const { return params_; }
  std::size_t scalar_count() const;
  void reset_adam_state();

 private:
  std::vector<std::unique_ptr<Param>> params_;
  std::unordered_map<std::string, Param*> by_name_;
};

// Binds parameters to tape leaves for one forward/backward pass.
class Graph {
 public:
  explicit Graph(Tape& tape) : tape_(&tape) {}
  Var use(Param& p);
  Tape& tape() { return *tape_; }
  const std::vector<std::pair<Param*, Var>>& bindings() const { return bindings_; }

 private:
  Tape* tape_;
  std::vector<std::pair<Param*, Var>> bindings_;
  std::unordered_map<const Param*, int> index_;
};

enum class Act { None, Tanh, Gelu };

Var activate(Var x, Act act);

struct Linear {
  Param* W = nullptr;  // in x out
  Param* b = nullptr;  // 1 x out

  static Linear create(ParamStore& store, const std::string& name, Eigen::Index in,
                       Eigen::Index out, Rng& rng);
  Var operator()(Graph& g, Var x) const;
};

struct LayerNorm {
  Param* gain = nullptr;
  Param* bias = nullptr;

  static LayerNorm create(ParamStore& store, const std::string& name, Eigen::Index d);
  Var operator()(Graph& g, Var x) const;
};

// Linear stack with the given activation on every layer except the last.
struct Mlp {
  std::vector<Linear> layers;
  Act act = Act::Tanh;

  static Mlp create(ParamStore& store, const std::string& name, Eigen::Index in,
                    const std::vector<Eigen::Index>& hidden, Eigen::Index out, Act act,
                    Rng& rng);
  Var operator()(Graph& g, Var x) const;
};

struct MultiHeadAttention {
  Linear wq, wk, wv, wo;
  int heads = 1;

  static MultiHeadAttention create(ParamStore& store, const std::string& name, Eigen::Index d,
                                   int heads, Rng& rng);
  // queries: q x d, context: n x d -> q x d. Pass the same Var for self-attention.
  Var operator()(Graph& g, Var queries, Var context) const;
};

// Pre-LN transformer encoder layer: x += attn(LN(x)); x += ff(LN(x)).
struct EncoderLayer {
  LayerNorm ln1;
  MultiHeadAttention attn;
  LayerNorm ln2;
  Mlp ff;

  static EncoderLayer create(ParamStore& store, const std::string& name, Eigen::Index d,
                             int heads, Eigen::Index ff_width, Rng& rng);
  Var operator()(Graph& g, Var x) const;
};

// Query-side layer: self-attention among the m queries, cross-attention to
// the encoded input sequence, then feed-forward. Pre-LN with residuals.
struct QueryLayer {
  LayerNorm ln_self;
  MultiHeadAttention self_attn;
  LayerNorm ln_cross;
  MultiHeadAttention cross_attn;
  LayerNorm ln_ff;
  Mlp ff;

  static QueryLayer create(ParamStore& store, const std::string& name, Eigen::Index d,
                           int heads, Eigen::Index ff_width, Rng& rng);
  Var operator()(Graph& g, Var q, Var memory) const;
};

// Maps a variable-length token sequence (n x d) to exactly m output tokens
// (m x d) via learned queries, translation-style.
struct SeqToSet {
  std::vector<EncoderLayer> enc_layers;
  Param* queries = nullptr;  // m x d
  std::vector<QueryLayer> query_layers;
  LayerNorm final_ln;

  static SeqToSet create(ParamStore& store, const std::string& name, Eigen::Index d, int m,
                         int layers, int heads, Eigen::Index ff_width, Rng& rng);
  Var operator()(Graph& g, Var tokens) const;
};

class Adam {
 public:
  explicit Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  // Applies one update using gradients accumulated on the graph's tape.
  void step(Graph& graph, double lr);
  // Same update from externally accumulated gradients (e.g. batch averages).
  void step(const std::vector<std::pair<Param*, Mat>>& grads, double lr);
  void reset() { t_ = 0; }

 private:
  void update(Param& p, const Mat& g, double lr, double c1, double c2);
  double beta1_, beta2_, eps_;
  long t_ = 0;
};

}  // namespace lmp::nn
