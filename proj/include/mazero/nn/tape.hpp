#pragma once

#include <Eigen/Dense>

#include <initializer_list>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

namespace mazero::nn {

// Row-major so that regrouping (B*n) x D rows into B x (n*D) is a reshape.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

using Gradients = std::map<std::string, Matrix>;

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode differentiation over matrix-valued nodes. Each op consumes
// and produces row-batched matrices; rows index (sample, agent) pairs.
// With record=false the tape only evaluates values and Backward is invalid.
class Tape {
 public:
  explicit Tape(bool record = true) : record_(record) { nodes_.reserve(256); }

  bool recording() const { return record_; }

  Var Constant(Matrix m);
  // Parameters are referenced, not copied; they must outlive the tape.
  Var Param(const std::string& name, const Matrix& value);

  const Matrix& value(Var v) const;
  const Matrix& grad(Var v) const { return nodes_[v.id].grad; }

  Var Linear(Var x, Var w, Var b);
  Var Relu(Var x);
  Var LayerNorm(Var x, Var gain, Var bias);
  Var Add(Var a, Var b);
  Var Scale(Var a, double c);
  // y[r] = x[r] + pos[r % n].
  Var AddPositional(Var x, Var pos, int n);
  Var ConcatCols(std::initializer_list<Var> parts);
  // (B*n) x D -> B x (n*D); rows of a group become one wide row.
  Var GroupRows(Var x, int n);
  // Single-head scaled dot-product attention inside consecutive groups of n rows.
  Var Attention(Var q, Var k, Var v, int n);
  Var Softmax(Var x);
  Var MatMulConst(Var x, const Matrix& c);

  // Scalar losses (1x1). Targets may be unnormalized; rows are weighted.
  Var SoftmaxCrossEntropy(Var logits, const Matrix& targets, const Vector& row_weights);
  Var SquaredError(Var x, const Matrix& targets, const Vector& row_weights);
  Var AddScalars(const std::vector<Var>& terms);

  void Backward(Var loss);

  // Accumulated parameter gradients after Backward, keyed by parameter name.
  Gradients ParamGradients() const;

  // Attention weights of the most recent Attention node (for inspection).
  const Matrix& LastAttentionWeights() const;

 private:
  enum class Op {
    kConstant, kParam, kLinear, kRelu, kLayerNorm, kAdd, kScale, kAddPositional,
    kConcat, kGroupRows, kAttention, kSoftmax, kMatMulConst, kSoftmaxXent,
    kSquaredError, kAddScalars,
  };

  struct Node {
    Op op = Op::kConstant;
    int a = -1, b = -1, c = -1;
    int n = 0;
    double scalar = 0.0;
    Matrix value;
    const Matrix* ref = nullptr;
    Matrix grad;
    Matrix aux;   // op-specific forward cache
    Matrix aux2;
    Vector weights;
    std::vector<int> inputs;
    std::string name;
  };

  Var Push(Node node);
  Matrix& GradOf(int id);

  bool record_;
  std::vector<Node> nodes_;
  std::unordered_map<const Matrix*, int> param_ids_;
  int last_attention_ = -1;
};

double GlobalNorm(const Gradients& g);
void ScaleGradients(Gradients& g, double c);

}  // namespace mazero::nn
