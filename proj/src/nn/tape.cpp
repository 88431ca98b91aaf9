#include "mazero/nn/tape.hpp"

#include <cmath>

#include "mazero/core.hpp"

namespace mazero::nn {
namespace {

constexpr double kLayerNormEps = 1e-5;

void CheckRows(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows()) {
    Fail(ErrorKind::kDimensionMismatch,
         std::string(op) + ": row mismatch " + std::to_string(a.rows()) + " vs " +
             std::to_string(b.rows()));
  }
}

}  // namespace

Var Tape::Push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

const Matrix& Tape::value(Var v) const {
  const Node& n = nodes_[v.id];
  return n.ref ? *n.ref : n.value;
}

Matrix& Tape::GradOf(int id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) {
    const Matrix& v = n.ref ? *n.ref : n.value;
    n.grad = Matrix::Zero(v.rows(), v.cols());
  }
  return n.grad;
}

Var Tape::Constant(Matrix m) {
  Node n;
  n.op = Op::kConstant;
  n.value = std::move(m);
  return Push(std::move(n));
}

Var Tape::Param(const std::string& name, const Matrix& value) {
  auto it = param_ids_.find(&value);
  if (it != param_ids_.end()) return Var{it->second};
  Node n;
  n.op = Op::kParam;
  n.ref = &value;
  n.name = name;
  Var v = Push(std::move(n));
  param_ids_[&value] = v.id;
  return v;
}

Var Tape::Linear(Var x, Var w, Var b) {
  const Matrix& X = value(x);
  const Matrix& W = value(w);
  const Matrix& B = value(b);
  if (X.cols() != W.rows() || B.cols() != W.cols() || B.rows() != 1) {
    Fail(ErrorKind::kDimensionMismatch,
         "linear: input " + std::to_string(X.cols()) + " vs weight " +
             std::to_string(W.rows()) + "x" + std::to_string(W.cols()));
  }
  Node n;
  n.op = Op::kLinear;
  n.a = x.id;
  n.b = w.id;
  n.c = b.id;
  n.value.noalias() = X * W;
  n.value.rowwise() += B.row(0);
  return Push(std::move(n));
}

Var Tape::Relu(Var x) {
  Node n;
  n.op = Op::kRelu;
  n.a = x.id;
  n.value = value(x).cwiseMax(0.0);
  return Push(std::move(n));
}

Var Tape::LayerNorm(Var x, Var gain, Var bias) {
  const Matrix& X = value(x);
  const Matrix& G = value(gain);
  const Matrix& Bi = value(bias);
  if (G.cols() != X.cols() || Bi.cols() != X.cols()) {
    Fail(ErrorKind::kDimensionMismatch, "layer_norm: width mismatch");
  }
  Node n;
  n.op = Op::kLayerNorm;
  n.a = x.id;
  n.b = gain.id;
  n.c = bias.id;
  const auto d = static_cast<double>(X.cols());
  Matrix xhat(X.rows(), X.cols());
  Matrix inv_std(X.rows(), 1);
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    const double mean = X.row(r).sum() / d;
    const double var = (X.row(r).array() - mean).square().sum() / d;
    const double is = 1.0 / std::sqrt(var + kLayerNormEps);
    xhat.row(r) = (X.row(r).array() - mean) * is;
    inv_std(r, 0) = is;
  }
  n.value = xhat.array().rowwise() * G.row(0).array();
  n.value.rowwise() += Bi.row(0);
  if (record_) {
    n.aux = std::move(xhat);
    n.aux2 = std::move(inv_std);
  }
  return Push(std::move(n));
}

Var Tape::Add(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  if (A.rows() != B.rows() || A.cols() != B.cols()) {
    Fail(ErrorKind::kDimensionMismatch, "add: shape mismatch");
  }
  Node n;
  n.op = Op::kAdd;
  n.a = a.id;
  n.b = b.id;
  n.value = A + B;
  return Push(std::move(n));
}

Var Tape::Scale(Var a, double c) {
  Node n;
  n.op = Op::kScale;
  n.a = a.id;
  n.scalar = c;
  n.value = value(a) * c;
  return Push(std::move(n));
}

Var Tape::AddPositional(Var x, Var pos, int group) {
  const Matrix& X = value(x);
  const Matrix& P = value(pos);
  if (group <= 0 || X.rows() % group != 0 || P.rows() < group || P.cols() != X.cols()) {
    Fail(ErrorKind::kDimensionMismatch, "add_positional: shape mismatch");
  }
  Node n;
  n.op = Op::kAddPositional;
  n.a = x.id;
  n.b = pos.id;
  n.n = group;
  n.value = X;
  for (Eigen::Index r = 0; r < X.rows(); ++r) n.value.row(r) += P.row(r % group);
  return Push(std::move(n));
}

Var Tape::ConcatCols(std::initializer_list<Var> parts) {
  Node n;
  n.op = Op::kConcat;
  Eigen::Index rows = -1, cols = 0;
  for (Var p : parts) {
    const Matrix& v = value(p);
    if (rows >= 0 && v.rows() != rows) {
      Fail(ErrorKind::kDimensionMismatch, "concat: row mismatch");
    }
    rows = v.rows();
    cols += v.cols();
    n.inputs.push_back(p.id);
  }
  n.value.resize(rows, cols);
  Eigen::Index off = 0;
  for (Var p : parts) {
    const Matrix& v = value(p);
    n.value.middleCols(off, v.cols()) = v;
    off += v.cols();
  }
  return Push(std::move(n));
}

Var Tape::GroupRows(Var x, int group) {
  const Matrix& X = value(x);
  if (group <= 0 || X.rows() % group != 0) {
    Fail(ErrorKind::kDimensionMismatch, "group_rows: rows not divisible by group");
  }
  Node n;
  n.op = Op::kGroupRows;
  n.a = x.id;
  n.n = group;
  n.value = Eigen::Map<const Matrix>(X.data(), X.rows() / group, X.cols() * group);
  return Push(std::move(n));
}

Var Tape::Attention(Var q, Var k, Var v, int group) {
  const Matrix& Q = value(q);
  const Matrix& K = value(k);
  const Matrix& V = value(v);
  CheckRows(Q, K, "attention");
  CheckRows(Q, V, "attention");
  if (Q.cols() != K.cols() || group <= 0 || Q.rows() % group != 0) {
    Fail(ErrorKind::kDimensionMismatch, "attention: shape mismatch");
  }
  Node n;
  n.op = Op::kAttention;
  n.a = q.id;
  n.b = k.id;
  n.c = v.id;
  n.n = group;
  const double scale = 1.0 / std::sqrt(static_cast<double>(Q.cols()));
  const Eigen::Index groups = Q.rows() / group;
  n.value.resize(Q.rows(), V.cols());
  n.aux.resize(Q.rows(), group);
  for (Eigen::Index g = 0; g < groups; ++g) {
    const Eigen::Index r0 = g * group;
    Matrix s = Q.middleRows(r0, group) * K.middleRows(r0, group).transpose() * scale;
    for (int i = 0; i < group; ++i) {
      const double m = s.row(i).maxCoeff();
      s.row(i) = (s.row(i).array() - m).exp();
      s.row(i) /= s.row(i).sum();
    }
    n.value.middleRows(r0, group).noalias() = s * V.middleRows(r0, group);
    n.aux.middleRows(r0, group) = s;
  }
  Var out = Push(std::move(n));
  last_attention_ = out.id;
  return out;
}

const Matrix& Tape::LastAttentionWeights() const {
  if (last_attention_ < 0) Fail(ErrorKind::kInvalidArgument, "no attention node on tape");
  return nodes_[last_attention_].aux;
}

Var Tape::Softmax(Var x) {
  const Matrix& X = value(x);
  Node n;
  n.op = Op::kSoftmax;
  n.a = x.id;
  n.value.resize(X.rows(), X.cols());
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    const double m = X.row(r).maxCoeff();
    n.value.row(r) = (X.row(r).array() - m).exp();
    n.value.row(r) /= n.value.row(r).sum();
  }
  return Push(std::move(n));
}

Var Tape::MatMulConst(Var x, const Matrix& c) {
  const Matrix& X = value(x);
  if (X.cols() != c.rows()) Fail(ErrorKind::kDimensionMismatch, "matmul_const: shape mismatch");
  Node n;
  n.op = Op::kMatMulConst;
  n.a = x.id;
  n.value = X * c;
  if (record_) n.aux = c;
  return Push(std::move(n));
}

Var Tape::SoftmaxCrossEntropy(Var logits, const Matrix& targets, const Vector& row_weights) {
  const Matrix& L = value(logits);
  if (targets.rows() != L.rows() || targets.cols() != L.cols() ||
      row_weights.size() != L.rows()) {
    Fail(ErrorKind::kDimensionMismatch, "softmax_xent: shape mismatch");
  }
  Node n;
  n.op = Op::kSoftmaxXent;
  n.a = logits.id;
  Matrix probs(L.rows(), L.cols());
  double loss = 0.0;
  for (Eigen::Index r = 0; r < L.rows(); ++r) {
    const double m = L.row(r).maxCoeff();
    const double lse = m + std::log((L.row(r).array() - m).exp().sum());
    probs.row(r) = (L.row(r).array() - lse).exp();
    if (row_weights[r] != 0.0) {
      loss -= row_weights[r] * (targets.row(r).array() * (L.row(r).array() - lse)).sum();
    }
  }
  n.value = Matrix::Constant(1, 1, loss);
  if (record_) {
    n.aux = std::move(probs);
    n.aux2 = targets;
    n.weights = row_weights;
  }
  return Push(std::move(n));
}

Var Tape::SquaredError(Var x, const Matrix& targets, const Vector& row_weights) {
  const Matrix& X = value(x);
  if (targets.rows() != X.rows() || targets.cols() != X.cols() ||
      row_weights.size() != X.rows()) {
    Fail(ErrorKind::kDimensionMismatch, "squared_error: shape mismatch");
  }
  Node n;
  n.op = Op::kSquaredError;
  n.a = x.id;
  Matrix diff = X - targets;
  const double loss = (diff.rowwise().squaredNorm().array() * row_weights.array()).sum();
  n.value = Matrix::Constant(1, 1, loss);
  if (record_) {
    n.aux = std::move(diff);
    n.weights = row_weights;
  }
  return Push(std::move(n));
}

Var Tape::AddScalars(const std::vector<Var>& terms) {
  Node n;
  n.op = Op::kAddScalars;
  double s = 0.0;
  for (Var t : terms) {
    const Matrix& v = value(t);
    if (v.size() != 1) Fail(ErrorKind::kDimensionMismatch, "add_scalars: non-scalar term");
    s += v(0, 0);
    n.inputs.push_back(t.id);
  }
  n.value = Matrix::Constant(1, 1, s);
  return Push(std::move(n));
}

void Tape::Backward(Var loss) {
  if (!record_) Fail(ErrorKind::kInvalidArgument, "backward on a non-recording tape");
  if (value(loss).size() != 1) Fail(ErrorKind::kDimensionMismatch, "backward needs a scalar");
  GradOf(loss.id)(0, 0) += 1.0;
  for (int id = loss.id; id >= 0; --id) {
    // Copy the op description; GradOf may touch other nodes but never this one.
    Node& node = nodes_[id];
    if (node.grad.size() == 0) continue;
    const Matrix dy = node.grad;
    switch (node.op) {
      case Op::kConstant:
      case Op::kParam:
        break;
      case Op::kLinear: {
        const Matrix& X = value(Var{node.a});
        const Matrix& W = value(Var{node.b});
        if (nodes_[node.a].op != Op::kConstant) GradOf(node.a).noalias() += dy * W.transpose();
        GradOf(node.b).noalias() += X.transpose() * dy;
        GradOf(node.c) += dy.colwise().sum();
        break;
      }
      case Op::kRelu: {
        const Matrix& Y = node.value;
        GradOf(node.a).array() += (Y.array() > 0.0).select(dy.array(), 0.0);
        break;
      }
      case Op::kLayerNorm: {
        const Matrix& G = value(Var{node.b});
        const Matrix& xhat = node.aux;
        GradOf(node.b) += (dy.array() * xhat.array()).colwise().sum().matrix();
        GradOf(node.c) += dy.colwise().sum();
        const auto d = static_cast<double>(dy.cols());
        Matrix dxhat = dy.array().rowwise() * G.row(0).array();
        Matrix& dx = GradOf(node.a);
        for (Eigen::Index r = 0; r < dy.rows(); ++r) {
          const double m1 = dxhat.row(r).sum() / d;
          const double m2 = (dxhat.row(r).array() * xhat.row(r).array()).sum() / d;
          dx.row(r).array() +=
              node.aux2(r, 0) * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2);
        }
        break;
      }
      case Op::kAdd:
        GradOf(node.a) += dy;
        GradOf(node.b) += dy;
        break;
      case Op::kScale:
        GradOf(node.a) += dy * node.scalar;
        break;
      case Op::kAddPositional: {
        GradOf(node.a) += dy;
        Matrix& dp = GradOf(node.b);
        for (Eigen::Index r = 0; r < dy.rows(); ++r) dp.row(r % node.n) += dy.row(r);
        break;
      }
      case Op::kConcat: {
        Eigen::Index off = 0;
        for (int in : node.inputs) {
          const Eigen::Index w = value(Var{in}).cols();
          if (nodes_[in].op != Op::kConstant) GradOf(in) += dy.middleCols(off, w);
          off += w;
        }
        break;
      }
      case Op::kGroupRows: {
        Matrix& dx = GradOf(node.a);
        dx += Eigen::Map<const Matrix>(dy.data(), dx.rows(), dx.cols());
        break;
      }
      case Op::kAttention: {
        const Matrix& Q = value(Var{node.a});
        const Matrix& K = value(Var{node.b});
        const Matrix& V = value(Var{node.c});
        const int group = node.n;
        const double scale = 1.0 / std::sqrt(static_cast<double>(Q.cols()));
        Matrix& dq = GradOf(node.a);
        Matrix& dk = GradOf(node.b);
        Matrix& dv = GradOf(node.c);
        for (Eigen::Index r0 = 0; r0 < Q.rows(); r0 += group) {
          const auto A = node.aux.middleRows(r0, group);
          const auto dY = dy.middleRows(r0, group);
          dv.middleRows(r0, group).noalias() += A.transpose() * dY;
          Matrix dA = dY * V.middleRows(r0, group).transpose();
          Matrix dS(group, group);
          for (int i = 0; i < group; ++i) {
            const double dot = (dA.row(i).array() * A.row(i).array()).sum();
            dS.row(i) = A.row(i).array() * (dA.row(i).array() - dot);
          }
          dS *= scale;
          dq.middleRows(r0, group).noalias() += dS * K.middleRows(r0, group);
          dk.middleRows(r0, group).noalias() += dS.transpose() * Q.middleRows(r0, group);
        }
        break;
      }
      case Op::kSoftmax: {
        const Matrix& Y = node.value;
        Matrix& dx = GradOf(node.a);
        for (Eigen::Index r = 0; r < Y.rows(); ++r) {
          const double dot = (dy.row(r).array() * Y.row(r).array()).sum();
          dx.row(r).array() += Y.row(r).array() * (dy.row(r).array() - dot);
        }
        break;
      }
      case Op::kMatMulConst:
        GradOf(node.a).noalias() += dy * node.aux.transpose();
        break;
      case Op::kSoftmaxXent: {
        const double g = dy(0, 0);
        Matrix& dx = GradOf(node.a);
        for (Eigen::Index r = 0; r < node.aux.rows(); ++r) {
          const double w = node.weights[r];
          if (w == 0.0) continue;
          const double tsum = node.aux2.row(r).sum();
          dx.row(r) += g * w * (node.aux.row(r) * tsum - node.aux2.row(r));
        }
        break;
      }
      case Op::kSquaredError: {
        const double g = dy(0, 0);
        Matrix& dx = GradOf(node.a);
        for (Eigen::Index r = 0; r < node.aux.rows(); ++r) {
          dx.row(r) += 2.0 * g * node.weights[r] * node.aux.row(r);
        }
        break;
      }
      case Op::kAddScalars:
        for (int in : node.inputs) GradOf(in)(0, 0) += dy(0, 0);
        break;
    }
  }
}

Gradients Tape::ParamGradients() const {
  Gradients out;
  for (const Node& n : nodes_) {
    if (n.op != Op::kParam) continue;
    if (n.grad.size() == 0) {
      out[n.name] = Matrix::Zero(n.ref->rows(), n.ref->cols());
    } else {
      out[n.name] = n.grad;
    }
  }
  return out;
}

double GlobalNorm(const Gradients& g) {
  double s = 0.0;
  for (const auto& [name, m] : g) s += m.squaredNorm();
  return std::sqrt(s);
}

void ScaleGradients(Gradients& g, double c) {
  for (auto& [name, m] : g) m *= c;
}

}  // namespace mazero::nn
