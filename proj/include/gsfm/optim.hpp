#pragma once

#include <string>
#include <vector>

#include "gsfm/tensor.hpp"

namespace gsfm {

// named parameter list shared by optimizer and checkpointing
template <class T>
using ParamList = std::vector<std::pair<std::string, Tensor<T>*>>;

enum class OptimKind { Adam, SgdMomentum };

template <class T>
class Optimizer {
 public:
  Optimizer(OptimKind kind, ParamList<T> params, double lr);

  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }
  long step_count() const { return t_; }

  // consumes populated grads, then clears them
  void step();

  void save_state(const std::string& dir) const;
  void load_state(const std::string& dir);

 private:
  OptimKind kind_;
  ParamList<T> params_;
  double lr_;
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  double momentum_ = 0.9;
  long t_ = 0;
  std::vector<std::vector<T>> m_, v_;
};

}  // namespace gsfm
