#include "gsfm/optim.hpp"

#include <cmath>
#include <filesystem>

#include "gsfm/serialize.hpp"
#include "json.hpp"

namespace gsfm {

template <class T>
Optimizer<T>::Optimizer(OptimKind kind, ParamList<T> params, double lr)
    : kind_(kind), params_(std::move(params)), lr_(lr) {
  m_.resize(params_.size());
  v_.resize(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) {
    m_[i].assign(params_[i].second->numel(), T(0));
    if (kind_ == OptimKind::Adam) v_[i].assign(params_[i].second->numel(), T(0));
  }
}

template <class T>
void Optimizer<T>::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor<T>& p = *params_[i].second;
    if (!p.has_grad()) continue;  // unused branch this step
    const auto& g = p.grad();
    T* w = p.data();
    if (kind_ == OptimKind::Adam) {
      for (std::size_t j = 0; j < g.size(); ++j) {
        m_[i][j] = static_cast<T>(beta1_ * m_[i][j] + (1.0 - beta1_) * g[j]);
        v_[i][j] = static_cast<T>(beta2_ * v_[i][j] + (1.0 - beta2_) * g[j] * g[j]);
        const double mh = m_[i][j] / bc1;
        const double vh = v_[i][j] / bc2;
        w[j] -= static_cast<T>(lr_ * mh / (std::sqrt(vh) + eps_));
      }
    } else {
      for (std::size_t j = 0; j < g.size(); ++j) {
        m_[i][j] = static_cast<T>(momentum_ * m_[i][j] + g[j]);
        w[j] -= static_cast<T>(lr_ * m_[i][j]);
      }
    }
    p.clear_grad();
  }
}

template <class T>
void Optimizer<T>::save_state(const std::string& dir) const {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const std::string& name = params_[i].first;
    save_tensor(dir + "/" + name + ".m",
                Tensor<T>({m_[i].size()}, std::vector<T>(m_[i])));
    if (kind_ == OptimKind::Adam)
      save_tensor(dir + "/" + name + ".v",
                  Tensor<T>({v_[i].size()}, std::vector<T>(v_[i])));
  }
  nlohmann::json meta;
  meta["t"] = t_;
  meta["lr"] = lr_;
  meta["kind"] = kind_ == OptimKind::Adam ? "adam" : "sgd";
  write_text_file(dir + "/optimizer.json", meta.dump());
}

template <class T>
void Optimizer<T>::load_state(const std::string& dir) {
  nlohmann::json meta = nlohmann::json::parse(read_text_file(dir + "/optimizer.json"));
  t_ = meta.at("t").get<long>();
  lr_ = meta.at("lr").get<double>();
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const std::string& name = params_[i].first;
    m_[i] = load_tensor<T>(dir + "/" + name + ".m").vec();
    if (kind_ == OptimKind::Adam)
      v_[i] = load_tensor<T>(dir + "/" + name + ".v").vec();
    if (m_[i].size() != params_[i].second->numel())
      throw std::runtime_error("optimizer state shape mismatch for " + name);
  }
}

template class Optimizer<float>;
template class Optimizer<double>;

}  // namespace gsfm
