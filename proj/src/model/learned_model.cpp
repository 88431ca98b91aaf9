#include "mazero/model/learned_model.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace mazero {
namespace {

std::vector<int> ParseIntList(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stoi(item));
  }
  return out;
}

std::string FormatIntList(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(v[i]);
  }
  return s;
}

void GetList(const ConfigMap& m, const std::string& key, std::vector<int>& out) {
  std::string raw;
  if (!m.Has(key)) return;
  m.Get(key, raw);
  try {
    out = ParseIntList(raw);
  } catch (const std::exception&) {
    Fail(ErrorKind::kUsage, "config key '" + key + "': bad integer list '" + raw + "'");
  }
}

void AddAffine(ModelParams& p, const std::string& prefix, int in, int out, RngStream& rng,
               bool with_ln) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  nn::Matrix w(in, out), b(1, out);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = (2.0 * rng.Uniform() - 1.0) * bound;
  for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = (2.0 * rng.Uniform() - 1.0) * bound;
  p.tensors[prefix + ".W"] = std::move(w);
  p.tensors[prefix + ".b"] = std::move(b);
  if (with_ln) {
    p.tensors[prefix + ".ln.g"] = nn::Matrix::Ones(1, out);
    p.tensors[prefix + ".ln.b"] = nn::Matrix::Zero(1, out);
  }
}

void AddMlp(ModelParams& p, const std::string& prefix, int in, const std::vector<int>& hidden,
            int out, RngStream& rng) {
  int width = in;
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    AddAffine(p, prefix + ".h" + std::to_string(i), width, hidden[i], rng, true);
    width = hidden[i];
  }
  AddAffine(p, prefix + ".out", width, out, rng, false);
}

}  // namespace

void ModelConfig::Load(const ConfigMap& m) {
  m.Get("model.latent_dim", latent_dim);
  GetList(m, "model.repr_hidden", repr_hidden);
  GetList(m, "model.dyn_hidden", dyn_hidden);
  GetList(m, "model.reward_hidden", reward_hidden);
  GetList(m, "model.value_hidden", value_hidden);
  GetList(m, "model.policy_hidden", policy_hidden);
  m.Get("model.comm_layers", comm_layers);
  m.Get("model.positional_encoding", positional_encoding);
  m.Get("model.support_bins", support_bins);
  m.Get("model.support_lo", support_lo);
  m.Get("model.support_hi", support_hi);
  m.Get("model.stack_depth", stack_depth);
}

void ModelConfig::Store(ConfigMap& m) const {
  m.Set("model.latent_dim", std::to_string(latent_dim));
  m.Set("model.repr_hidden", FormatIntList(repr_hidden));
  m.Set("model.dyn_hidden", FormatIntList(dyn_hidden));
  m.Set("model.reward_hidden", FormatIntList(reward_hidden));
  m.Set("model.value_hidden", FormatIntList(value_hidden));
  m.Set("model.policy_hidden", FormatIntList(policy_hidden));
  m.Set("model.comm_layers", std::to_string(comm_layers));
  m.Set("model.positional_encoding", positional_encoding ? "true" : "false");
  m.Set("model.support_bins", std::to_string(support_bins));
  m.Set("model.support_lo", FormatDouble(support_lo));
  m.Set("model.support_hi", FormatDouble(support_hi));
  m.Set("model.stack_depth", std::to_string(stack_depth));
}

void ModelConfig::Validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) Fail(ErrorKind::kInvalidArgument, what);
  };
  require(num_agents >= 1, "model needs at least one agent");
  require(action_size >= 1, "model needs a nonempty action space");
  require(obs_features >= 1 && stack_depth >= 1, "model needs observation features");
  require(latent_dim >= 1, "latent_dim must be positive");
  require(comm_layers >= 1, "comm_layers must be >= 1");
  require(support_bins >= 2 && support_hi > support_lo, "bad categorical support");
  for (const auto* v : {&repr_hidden, &dyn_hidden, &reward_hidden, &value_hidden, &policy_hidden}) {
    for (int w : *v) require(w >= 1, "hidden widths must be positive");
  }
}

const nn::Matrix& ModelParams::at(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) Fail(ErrorKind::kInvalidArgument, "no parameter named " + name);
  return it->second;
}

nn::Matrix& ModelParams::at(const std::string& name) {
  auto it = tensors.find(name);
  if (it == tensors.end()) Fail(ErrorKind::kInvalidArgument, "no parameter named " + name);
  return it->second;
}

std::size_t ModelParams::NumScalars() const {
  std::size_t n = 0;
  for (const auto& [k, m] : tensors) n += static_cast<std::size_t>(m.size());
  return n;
}

bool ModelParams::AllFinite() const {
  for (const auto& [k, m] : tensors) {
    if (!m.allFinite()) return false;
  }
  return true;
}

ModelParams InitParams(const ModelConfig& c, RngStream& rng) {
  c.Validate();
  ModelParams p;
  const int d = c.latent_dim;
  const int a = c.action_size;
  const int in = c.obs_features * c.stack_depth;
  p.tensors["repr.in_ln.g"] = nn::Matrix::Ones(1, in);
  p.tensors["repr.in_ln.b"] = nn::Matrix::Zero(1, in);
  AddMlp(p, "repr", in, c.repr_hidden, d, rng);

  AddAffine(p, "comm.enc", d + a, d, rng, false);
  {
    const double bound = 1.0 / std::sqrt(static_cast<double>(d));
    nn::Matrix pos(c.num_agents, d);
    for (Eigen::Index i = 0; i < pos.size(); ++i) pos.data()[i] = (2.0 * rng.Uniform() - 1.0) * bound;
    p.tensors["comm.pos"] = std::move(pos);
  }
  for (int l = 0; l < c.comm_layers; ++l) {
    const std::string pre = "comm.a" + std::to_string(l);
    AddAffine(p, pre + ".q", d, d, rng, false);
    AddAffine(p, pre + ".k", d, d, rng, false);
    AddAffine(p, pre + ".v", d, d, rng, false);
    if (l + 1 < c.comm_layers) {
      p.tensors[pre + ".ln.g"] = nn::Matrix::Ones(1, d);
      p.tensors[pre + ".ln.b"] = nn::Matrix::Zero(1, d);
    }
  }
  AddMlp(p, "dyn", d + a + d, c.dyn_hidden, d, rng);
  AddMlp(p, "reward", c.num_agents * (d + a), c.reward_hidden, c.support_bins, rng);
  AddMlp(p, "value", c.num_agents * d, c.value_hidden, c.support_bins, rng);
  AddMlp(p, "policy", d, c.policy_hidden, a, rng);
  return p;
}

ModelParams sync_target(const ModelParams& params) { return params; }

LearnedModel::LearnedModel(ModelConfig config, std::shared_ptr<const ModelParams> params)
    : config_(std::move(config)),
      params_(std::move(params)),
      support_(config_.support_bins, config_.support_lo, config_.support_hi) {
  config_.Validate();
  if (!params_) Fail(ErrorKind::kInvalidArgument, "learned model needs parameters");
  repr_in_ln_.ln_g = &params_->at("repr.in_ln.g");
  repr_in_ln_.ln_b = &params_->at("repr.in_ln.b");
  repr_in_ln_.g_name = "repr.in_ln.g";
  repr_in_ln_.beta_name = "repr.in_ln.b";
  repr_ = BindMlp("repr", config_.repr_hidden.size());
  dyn_ = BindMlp("dyn", config_.dyn_hidden.size());
  reward_ = BindMlp("reward", config_.reward_hidden.size());
  value_ = BindMlp("value", config_.value_hidden.size());
  policy_ = BindMlp("policy", config_.policy_hidden.size());
  comm_enc_ = Bind("comm.enc", false);
  comm_pos_ = &params_->at("comm.pos");
  if (comm_pos_->rows() != config_.num_agents || comm_pos_->cols() != config_.latent_dim) {
    Fail(ErrorKind::kDimensionMismatch, "comm.pos shape does not match the model config");
  }
  for (int l = 0; l < config_.comm_layers; ++l) {
    const std::string pre = "comm.a" + std::to_string(l);
    Attention at;
    at.q = Bind(pre + ".q", false);
    at.k = Bind(pre + ".k", false);
    at.v = Bind(pre + ".v", false);
    if (l + 1 < config_.comm_layers) {
      at.post_ln.ln_g = &params_->at(pre + ".ln.g");
      at.post_ln.ln_b = &params_->at(pre + ".ln.b");
      at.post_ln.g_name = pre + ".ln.g";
      at.post_ln.beta_name = pre + ".ln.b";
    }
    comm_layers_.push_back(std::move(at));
  }
}

LearnedModel::Layer LearnedModel::Bind(const std::string& prefix, bool with_ln) const {
  Layer l;
  l.w_name = prefix + ".W";
  l.b_name = prefix + ".b";
  l.w = &params_->at(l.w_name);
  l.b = &params_->at(l.b_name);
  if (with_ln) {
    l.g_name = prefix + ".ln.g";
    l.beta_name = prefix + ".ln.b";
    l.ln_g = &params_->at(l.g_name);
    l.ln_b = &params_->at(l.beta_name);
  }
  return l;
}

LearnedModel::Mlp LearnedModel::BindMlp(const std::string& prefix, std::size_t hidden) const {
  Mlp m;
  for (std::size_t i = 0; i < hidden; ++i) {
    m.hidden.push_back(Bind(prefix + ".h" + std::to_string(i), true));
  }
  m.out = Bind(prefix + ".out", false);
  return m;
}

nn::Var LearnedModel::RunLayer(nn::Tape& tape, const Layer& l, nn::Var x, bool activate) const {
  nn::Var y = tape.Linear(x, tape.Param(l.w_name, *l.w), tape.Param(l.b_name, *l.b));
  if (!activate) return y;
  y = tape.Relu(y);
  return tape.LayerNorm(y, tape.Param(l.g_name, *l.ln_g), tape.Param(l.beta_name, *l.ln_b));
}

nn::Var LearnedModel::RunMlp(nn::Tape& tape, const Mlp& mlp, nn::Var x) const {
  for (const Layer& l : mlp.hidden) x = RunLayer(tape, l, x, true);
  return RunLayer(tape, mlp.out, x, false);
}

std::vector<int> LearnedModel::action_sizes() const {
  return std::vector<int>(config_.num_agents, config_.action_size);
}

nn::Var LearnedModel::BuildRepresent(nn::Tape& tape, const RowMatrix& stacked_rows) const {
  const int in = config_.obs_features * config_.stack_depth;
  if (stacked_rows.cols() != in) {
    Fail(ErrorKind::kDimensionMismatch,
         "represent: observation width " + std::to_string(stacked_rows.cols()) +
             ", expected " + std::to_string(in));
  }
  nn::Var x = tape.Constant(stacked_rows);
  x = tape.LayerNorm(x, tape.Param(repr_in_ln_.g_name, *repr_in_ln_.ln_g),
                     tape.Param(repr_in_ln_.beta_name, *repr_in_ln_.ln_b));
  return RunMlp(tape, repr_, x);
}

nn::Var LearnedModel::BuildCommunicate(nn::Tape& tape, nn::Var states, nn::Var onehot) const {
  const int n = config_.num_agents;
  nn::Var u = RunLayer(tape, comm_enc_, tape.ConcatCols({states, onehot}), false);
  if (config_.positional_encoding) u = tape.AddPositional(u, tape.Param("comm.pos", *comm_pos_), n);
  nn::Var out;
  for (std::size_t l = 0; l < comm_layers_.size(); ++l) {
    const Attention& at = comm_layers_[l];
    nn::Var a = tape.Attention(RunLayer(tape, at.q, u, false), RunLayer(tape, at.k, u, false),
                               RunLayer(tape, at.v, u, false), n);
    if (l + 1 == comm_layers_.size()) {
      out = a;
    } else {
      u = tape.LayerNorm(tape.Add(u, a), tape.Param(at.post_ln.g_name, *at.post_ln.ln_g),
                         tape.Param(at.post_ln.beta_name, *at.post_ln.ln_b));
    }
  }
  return out;
}

nn::Var LearnedModel::BuildDynamics(nn::Tape& tape, nn::Var states, nn::Var onehot,
                                    nn::Var comm) const {
  nn::Var delta = RunMlp(tape, dyn_, tape.ConcatCols({states, onehot, comm}));
  return tape.Add(states, delta);
}

nn::Var LearnedModel::BuildRewardLogits(nn::Tape& tape, nn::Var states, nn::Var onehot) const {
  return RunMlp(tape, reward_,
                tape.GroupRows(tape.ConcatCols({states, onehot}), config_.num_agents));
}

nn::Var LearnedModel::BuildValueLogits(nn::Tape& tape, nn::Var states) const {
  return RunMlp(tape, value_, tape.GroupRows(states, config_.num_agents));
}

nn::Var LearnedModel::BuildPolicyLogits(nn::Tape& tape, nn::Var states) const {
  return RunMlp(tape, policy_, states);
}

RowMatrix LearnedModel::OneHot(const std::vector<JointAction>& actions) const {
  const int n = config_.num_agents;
  RowMatrix out = RowMatrix::Zero(static_cast<Eigen::Index>(actions.size()) * n, config_.action_size);
  for (std::size_t b = 0; b < actions.size(); ++b) {
    CheckJointAction(actions[b], action_sizes());
    for (int i = 0; i < n; ++i) out(static_cast<Eigen::Index>(b) * n + i, actions[b][i]) = 1.0;
  }
  return out;
}

double LearnedModel::LogitsToScalar(const nn::Matrix& logits_row) const {
  const std::vector<double> l(logits_row.data(), logits_row.data() + logits_row.size());
  return value_transform_inv(support_to_scalar(Softmax(l), support_));
}

LatentState LearnedModel::Represent(const ObservationHistory& obs) const {
  if (obs.num_agents() != config_.num_agents || obs.feature_length() != config_.obs_features ||
      obs.depth() != config_.stack_depth) {
    Fail(ErrorKind::kDimensionMismatch, "observation history shape does not match the model");
  }
  nn::Tape tape(false);
  LatentState s;
  s.agents = tape.value(BuildRepresent(tape, obs.Stacked()));
  return s;
}

Prediction LearnedModel::Predict(const LatentState& state) const {
  if (state.num_agents() != config_.num_agents || state.agents.cols() != config_.latent_dim) {
    Fail(ErrorKind::kDimensionMismatch, "latent state shape does not match the model");
  }
  nn::Tape tape(false);
  nn::Var s = tape.Constant(state.agents);
  Prediction p;
  p.value = LogitsToScalar(tape.value(BuildValueLogits(tape, s)));
  const nn::Matrix& logits = tape.value(BuildPolicyLogits(tape, s));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    p.policy_logits.emplace_back(logits.row(i).data(), logits.row(i).data() + logits.cols());
  }
  return p;
}

ModelTransition LearnedModel::Step(const LatentState& state, const JointAction& a) const {
  if (state.num_agents() != config_.num_agents || state.agents.cols() != config_.latent_dim) {
    Fail(ErrorKind::kDimensionMismatch, "latent state shape does not match the model");
  }
  nn::Tape tape(false);
  nn::Var s = tape.Constant(state.agents);
  nn::Var oh = tape.Constant(OneHot({a}));
  ModelTransition t;
  t.reward = LogitsToScalar(tape.value(BuildRewardLogits(tape, s, oh)));
  nn::Var e = BuildCommunicate(tape, s, oh);
  t.next.agents = tape.value(BuildDynamics(tape, s, oh, e));
  return t;
}

RowMatrix LearnedModel::Communication(const LatentState& state, const JointAction& a) const {
  nn::Tape tape(false);
  nn::Var s = tape.Constant(state.agents);
  return tape.value(BuildCommunicate(tape, s, tape.Constant(OneHot({a}))));
}

std::string FunctionBlock(const std::string& param_name) {
  return param_name.substr(0, param_name.find('.'));
}

void CheckGradientsFinite(const nn::Gradients& grads) {
  for (const auto& [name, g] : grads) {
    if (!g.allFinite()) {
      Fail(ErrorKind::kNanDetected,
           "non-finite gradient in function block '" + FunctionBlock(name) + "' (" + name + ")");
    }
  }
}

std::string SerializeCheckpoint(const Checkpoint& ckpt) {
  std::string out = "MAZERO-CHECKPOINT 1\n";
  out += "seed " + std::to_string(ckpt.seed) + "\n";
  out += "version " + std::to_string(ckpt.params.version) + "\n";
  out += "config " + std::to_string(ckpt.config.values().size()) + "\n";
  for (const auto& [k, v] : ckpt.config.values()) out += k + " = " + v + "\n";
  out += "tensors " + std::to_string(ckpt.params.tensors.size()) + "\n";
  for (const auto& [name, m] : ckpt.params.tensors) {
    out += "tensor " + name + " " + std::to_string(m.rows()) + " " + std::to_string(m.cols()) + "\n";
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        if (c) out += ' ';
        out += FormatDouble(m(r, c));
      }
      out += '\n';
    }
  }
  out += "end\n";
  return out;
}

Checkpoint ParseCheckpoint(const std::string& text) {
  std::istringstream in(text);
  auto bad = [](const std::string& what) { Fail(ErrorKind::kIo, "malformed checkpoint: " + what); };
  std::string magic;
  int format = 0;
  in >> magic >> format;
  if (magic != "MAZERO-CHECKPOINT") bad("missing header");
  if (format != 1) bad("unsupported format version " + std::to_string(format));
  Checkpoint ck;
  std::string word;
  std::size_t count = 0;
  in >> word >> ck.seed;
  if (word != "seed") bad("expected seed");
  in >> word >> ck.params.version;
  if (word != "version") bad("expected version");
  in >> word >> count;
  if (word != "config") bad("expected config block");
  std::string line;
  std::getline(in, line);
  std::string cfg;
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) bad("truncated config block");
    cfg += line + "\n";
  }
  ck.config = ConfigMap::Parse(cfg);
  in >> word >> count;
  if (word != "tensors") bad("expected tensor block");
  for (std::size_t i = 0; i < count; ++i) {
    std::string name;
    Eigen::Index rows = 0, cols = 0;
    in >> word >> name >> rows >> cols;
    if (word != "tensor" || rows < 0 || cols < 0) bad("bad tensor header");
    nn::Matrix m(rows, cols);
    for (Eigen::Index j = 0; j < m.size(); ++j) {
      std::string tok;
      in >> tok;
      char* end = nullptr;
      m.data()[j] = std::strtod(tok.c_str(), &end);
      if (tok.empty() || *end != '\0') bad("bad value in tensor " + name);
    }
    ck.params.tensors[name] = std::move(m);
  }
  in >> word;
  if (word != "end") bad("missing end marker");
  return ck;
}

void SaveCheckpoint(const Checkpoint& ckpt, const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) Fail(ErrorKind::kIo, "cannot write checkpoint " + path);
    out << SerializeCheckpoint(ckpt);
    if (!out) Fail(ErrorKind::kIo, "failed writing checkpoint " + path);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    Fail(ErrorKind::kIo, "cannot move checkpoint into place: " + path);
  }
}

Checkpoint LoadCheckpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kIo, "missing checkpoint " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseCheckpoint(ss.str());
}

}  // namespace mazero
