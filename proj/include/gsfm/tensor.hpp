#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace gsfm {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s);

template <class T>
struct Storage {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until backward touches it
  bool requires_grad = false;
};

// Dense row-major tensor with shared storage. Values are immutable once a
// tensor has entered a tape; grad buffers are the only mutable part.
template <class T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0))
      : s_(std::make_shared<Storage<T>>()) {
    s_->shape = std::move(shape);
    s_->data.assign(shape_numel(s_->shape), fill);
  }
  Tensor(Shape shape, std::vector<T> data) : s_(std::make_shared<Storage<T>>()) {
    if (shape_numel(shape) != data.size())
      throw std::invalid_argument("tensor: shape/data size mismatch");
    s_->shape = std::move(shape);
    s_->data = std::move(data);
  }

  static Tensor scalar(T v) { return Tensor({1}, std::vector<T>{v}); }

  bool defined() const { return static_cast<bool>(s_); }
  const Shape& shape() const { return s_->shape; }
  std::size_t rank() const { return s_->shape.size(); }
  std::size_t dim(std::size_t i) const { return s_->shape[i]; }
  std::size_t numel() const { return s_->data.size(); }

  const T* data() const { return s_->data.data(); }
  T* data() { return s_->data.data(); }
  const std::vector<T>& vec() const { return s_->data; }

  T item() const {
    if (numel() != 1) throw std::invalid_argument("item(): tensor is not scalar");
    return s_->data[0];
  }
  // row-major offset of an index tuple
  std::size_t offset(std::initializer_list<std::size_t> idx) const {
    std::size_t off = 0;
    std::size_t i = 0;
    for (auto v : idx) off = off * s_->shape[i++] + v;
    return off;
  }
  T at(std::initializer_list<std::size_t> idx) const { return s_->data[offset(idx)]; }

  Tensor& set_requires_grad(bool b = true) {
    s_->requires_grad = b;
    return *this;
  }
  bool requires_grad() const { return s_ && s_->requires_grad; }

  bool has_grad() const { return s_ && !s_->grad.empty(); }
  const std::vector<T>& grad() const {
    if (!has_grad()) throw std::runtime_error("grad(): no gradient populated");
    return s_->grad;
  }
  void zero_grad() {
    if (s_) s_->grad.assign(s_->data.size(), T(0));
  }
  void clear_grad() {
    if (s_) s_->grad.clear();
  }

  // deep copy detached from any graph
  Tensor clone() const {
    Tensor out(s_->shape, s_->data);
    return out;
  }

  template <class U>
  Tensor<U> cast() const {
    std::vector<U> d(s_->data.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = static_cast<U>(s_->data[i]);
    return Tensor<U>(s_->shape, std::move(d));
  }

  std::shared_ptr<Storage<T>> storage() const { return s_; }

 private:
  std::shared_ptr<Storage<T>> s_;
};

template <class T>
std::vector<T>& ensure_grad(Storage<T>& s) {
  if (s.grad.empty()) s.grad.assign(s.data.size(), T(0));
  return s.grad;
}

// Ordered op record for reverse-mode traversal. Ops are appended in forward
// (topological) order; backward walks the list in reverse.
template <class T>
class Tape {
 public:
  struct Node {
    std::vector<std::shared_ptr<Storage<T>>> inputs;
    std::vector<std::shared_ptr<Storage<T>>> outputs;
    std::function<void()> backward;
    const char* name;
  };

  void record(std::vector<std::shared_ptr<Storage<T>>> inputs,
              std::vector<std::shared_ptr<Storage<T>>> outputs,
              std::function<void()> backward, const char* name) {
    nodes_.push_back(Node{std::move(inputs), std::move(outputs), std::move(backward), name});
  }

  std::size_t size() const { return nodes_.size(); }

  // Seeds d(loss)/d(loss) = 1 and runs every node backward in reverse
  // order. Gradients accumulate additively across fan-out.
  void backward(const Tensor<T>& loss) {
    if (loss.numel() != 1)
      throw std::invalid_argument("backward(): loss must be scalar");
    ensure_grad(*loss.storage())[0] += T(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      bool live = false;
      for (auto& o : it->outputs)
        if (!o->grad.empty()) live = true;
      if (live) it->backward();
    }
  }

  void clear() { nodes_.clear(); }

  static Tape*& current() {
    static thread_local Tape* cur = nullptr;
    return cur;
  }

  // RAII activation; ops only record while a tape is current on this thread
  struct Scope {
    explicit Scope(Tape& t) : prev_(current()) { current() = &t; }
    ~Scope() { current() = prev_; }
    Tape* prev_;
  };

 private:
  std::vector<Node> nodes_;
};

template <class T>
bool grad_enabled_for(const std::vector<Tensor<T>>& ins) {
  if (!Tape<T>::current()) return false;
  for (auto& t : ins)
    if (t.requires_grad()) return true;
  return false;
}

enum class Padding { Zero, Replicate };

// ---- elementwise / reduction ops ------------------------------------------

template <class T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> divide(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> relu(const Tensor<T>& x);
template <class T> Tensor<T> sigmoid(const Tensor<T>& x);
template <class T> Tensor<T> exp(const Tensor<T>& x);
template <class T> Tensor<T> log(const Tensor<T>& x);
template <class T> Tensor<T> scalar_mul(const Tensor<T>& x, T c);
template <class T> Tensor<T> scalar_add(const Tensor<T>& x, T c);
template <class T> Tensor<T> sum(const Tensor<T>& x);
template <class T> Tensor<T> mean(const Tensor<T>& x);
template <class T> Tensor<T> softmax(const Tensor<T>& x, std::size_t axis);
template <class T> Tensor<T> reshape(const Tensor<T>& x, Shape shape);
template <class T> Tensor<T> concat(const std::vector<Tensor<T>>& xs, std::size_t axis);
// half-open channel slice along axis 0
template <class T> Tensor<T> slice0(const Tensor<T>& x, std::size_t from, std::size_t to);

// ---- spatial ops (CHW) -----------------------------------------------------

template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias,
                 Padding pad);
template <class T> Tensor<T> upsample2x(const Tensor<T>& x);
template <class T> Tensor<T> avgpool2x(const Tensor<T>& x);
template <class T> Tensor<T> global_avg_pool(const Tensor<T>& x);

// ---- verification ----------------------------------------------------------

// Max over coordinates of |analytic - central difference| / max(1, |analytic|).
template <class T>
double grad_check(const std::function<Tensor<T>(const Tensor<T>&)>& f,
                  const Tensor<T>& x, T h);

}  // namespace gsfm
