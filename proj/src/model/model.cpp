#include "mazero/model/model.hpp"

namespace mazero {

ObservationHistory::ObservationHistory(int num_agents, int feature_length, int depth)
    : num_agents_(num_agents), feature_length_(feature_length), depth_(depth) {
  if (num_agents < 1 || feature_length < 1 || depth < 1) {
    Fail(ErrorKind::kInvalidArgument, "observation history needs positive shape");
  }
  frames_.assign(depth, ObservationFrame::Zero(num_agents, feature_length));
}

void ObservationHistory::Reset(const ObservationFrame& first) {
  frames_.assign(depth_, ObservationFrame::Zero(num_agents_, feature_length_));
  Push(first);
}

void ObservationHistory::Push(const ObservationFrame& frame) {
  if (frame.rows() != num_agents_ || frame.cols() != feature_length_) {
    Fail(ErrorKind::kDimensionMismatch,
         "observation frame is " + std::to_string(frame.rows()) + "x" +
             std::to_string(frame.cols()) + ", expected " + std::to_string(num_agents_) +
             "x" + std::to_string(feature_length_));
  }
  for (int i = 0; i + 1 < depth_; ++i) frames_[i] = std::move(frames_[i + 1]);
  frames_[depth_ - 1] = frame;
}

RowMatrix ObservationHistory::Stacked() const {
  RowMatrix out(num_agents_, static_cast<Eigen::Index>(depth_) * feature_length_);
  for (int d = 0; d < depth_; ++d) {
    out.middleCols(static_cast<Eigen::Index>(d) * feature_length_, feature_length_) = frames_[d];
  }
  return out;
}

void CheckJointAction(const JointAction& a, const std::vector<int>& action_sizes) {
  if (a.num_agents() != static_cast<int>(action_sizes.size())) {
    Fail(ErrorKind::kDimensionMismatch,
         "joint action has " + std::to_string(a.num_agents()) + " entries, expected " +
             std::to_string(action_sizes.size()));
  }
  for (int i = 0; i < a.num_agents(); ++i) {
    if (a[i] < 0 || a[i] >= action_sizes[i]) {
      Fail(ErrorKind::kDimensionMismatch, "action " + std::to_string(a[i]) +
                                              " out of range for agent " + std::to_string(i));
    }
  }
}

}  // namespace mazero
