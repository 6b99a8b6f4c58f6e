#include "gsfm/memory.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gsfm/kernels.hpp"

namespace gsfm {

namespace {

template <class T>
void record_tape(const char* name, std::vector<Tensor<T>> ins, Tensor<T>& out,
                 std::function<void()> bwd) {
  if (!grad_enabled_for(ins)) return;
  out.set_requires_grad(true);
  std::vector<std::shared_ptr<Storage<T>>> is;
  for (auto& t : ins) is.push_back(t.storage());
  Tape<T>::current()->record(std::move(is), {out.storage()}, std::move(bwd), name);
}

}  // namespace

template <class T>
Tensor<T> affinity(const Tensor<T>& kq, const Tensor<T>& km) {
  if (kq.rank() != 2 || km.rank() != 2 || kq.dim(0) != km.dim(0))
    throw std::invalid_argument("affinity: expects [C_k,M] and [C_k,N]");
  const std::size_t ck = kq.dim(0), nq = kq.dim(1), nm = km.dim(1);
  Tensor<T> a({nq, nm});
  kern::affinity_forward(kq.data(), km.data(), a.data(), ck, nq, nm);
  auto sq = kq.storage(), sm = km.storage(), so = a.storage();
  record_tape<T>("affinity", {kq, km}, a, [sq, sm, so, ck, nq, nm]() {
    // kernels accumulate, so route each side through a scratch buffer when
    // only one input needs gradients
    std::vector<T> dump_q, dump_m;
    T* gq;
    T* gm;
    if (sq->requires_grad) {
      gq = ensure_grad(*sq).data();
    } else {
      dump_q.assign(sq->data.size(), T(0));
      gq = dump_q.data();
    }
    if (sm->requires_grad) {
      gm = ensure_grad(*sm).data();
    } else {
      dump_m.assign(sm->data.size(), T(0));
      gm = dump_m.data();
    }
    kern::affinity_backward(so->grad.data(), sq->data.data(), sm->data.data(), gq,
                            gm, ck, nq, nm);
  });
  return a;
}

template <class T>
Tensor<T> topk_normalize(const Tensor<T>& a, std::size_t k) {
  if (a.rank() != 2) throw std::invalid_argument("topk_normalize: expects [M,N]");
  if (k < 1) throw std::invalid_argument("topk_normalize: k must be >= 1");
  const std::size_t nq = a.dim(0), nm = a.dim(1);
  const std::size_t keep = std::min(k, nm);

  Tensor<T> out({nq, nm});
  auto kept = std::make_shared<std::vector<std::size_t>>(nq * keep);
  const T* pa = a.data();
  T* po = out.data();
  std::vector<std::size_t> order(nm);
  for (std::size_t i = 0; i < nq; ++i) {
    const T* row = pa + i * nm;
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::partial_sort(order.begin(), order.begin() + keep, order.end(),
                      [row](std::size_t x, std::size_t y) {
                        return row[x] != row[y] ? row[x] > row[y] : x < y;
                      });
    T mx = row[order[0]];
    T z = T(0);
    for (std::size_t t = 0; t < keep; ++t) {
      T e = std::exp(row[order[t]] - mx);
      po[i * nm + order[t]] = e;
      z += e;
    }
    for (std::size_t t = 0; t < keep; ++t) {
      po[i * nm + order[t]] /= z;
      (*kept)[i * keep + t] = order[t];
    }
  }
  auto sa = a.storage(), so = out.storage();
  record_tape<T>("topk_normalize", {a}, out, [sa, so, kept, nq, nm, keep]() {
    if (!sa->requires_grad) return;
    auto& ga = ensure_grad(*sa);
    const auto& go = so->grad;
    const auto& y = so->data;
    for (std::size_t i = 0; i < nq; ++i) {
      T dot = T(0);
      for (std::size_t t = 0; t < keep; ++t) {
        std::size_t j = (*kept)[i * keep + t];
        dot += go[i * nm + j] * y[i * nm + j];
      }
      for (std::size_t t = 0; t < keep; ++t) {
        std::size_t j = (*kept)[i * keep + t];
        ga[i * nm + j] += y[i * nm + j] * (go[i * nm + j] - dot);
      }
    }
  });
  return out;
}

template <class T>
Tensor<T> readout(const Tensor<T>& w, const Tensor<T>& vm) {
  if (w.rank() != 2 || vm.rank() != 2 || w.dim(1) != vm.dim(1))
    throw std::invalid_argument("readout: expects [M,N] and [C_v,N]");
  const std::size_t nq = w.dim(0), nm = w.dim(1), cv = vm.dim(0);
  Tensor<T> out({cv, nq});
  kern::readout_forward(w.data(), vm.data(), out.data(), cv, nq, nm);
  auto sw = w.storage(), sv = vm.storage(), so = out.storage();
  record_tape<T>("readout", {w, vm}, out, [sw, sv, so, cv, nq, nm]() {
    std::vector<T> dump_w, dump_v;
    T* gw;
    T* gv;
    if (sw->requires_grad) {
      gw = ensure_grad(*sw).data();
    } else {
      dump_w.assign(sw->data.size(), T(0));
      gw = dump_w.data();
    }
    if (sv->requires_grad) {
      gv = ensure_grad(*sv).data();
    } else {
      dump_v.assign(sv->data.size(), T(0));
      gv = dump_v.data();
    }
    kern::readout_backward(so->grad.data(), sw->data.data(), sv->data.data(), gw,
                           gv, cv, nq, nm);
  });
  return out;
}

template <class T>
std::size_t MemoryBank<T>::location_count() const {
  std::size_t n = 0;
  for (auto& e : frames_) n += e.key.dim(1);
  return n;
}

template <class T>
Tensor<T> MemoryBank<T>::keys() const {
  if (frames_.empty()) throw std::runtime_error("MemoryBank: empty");
  std::vector<Tensor<T>> ks;
  for (auto& e : frames_) ks.push_back(e.key);
  return frames_.size() == 1 ? frames_[0].key : concat(ks, 1);
}

template <class T>
Tensor<T> MemoryBank<T>::values() const {
  if (frames_.empty()) throw std::runtime_error("MemoryBank: empty");
  std::vector<Tensor<T>> vs;
  for (auto& e : frames_) vs.push_back(e.value);
  return frames_.size() == 1 ? frames_[0].value : concat(vs, 1);
}

template <class T>
void MemoryBank<T>::insert(int frame_id, const Tensor<T>& key_flat,
                           const Tensor<T>& value_flat) {
  if (key_flat.rank() != 2 || value_flat.rank() != 2 ||
      key_flat.dim(1) != value_flat.dim(1))
    throw std::invalid_argument("MemoryBank: keys/values must share locations");
  if (std::find(indices_.begin(), indices_.end(), frame_id) != indices_.end())
    throw std::invalid_argument("MemoryBank: duplicate frame " +
                                std::to_string(frame_id));
  if (!indices_.empty() && frame_id <= indices_.back())
    throw std::invalid_argument("MemoryBank: frame ids must increase");
  frames_.push_back(Entry{key_flat, value_flat});
  indices_.push_back(frame_id);
  if (capacity_ && frames_.size() > *capacity_) {
    // FIFO eviction that never removes the first frame (it holds the GT)
    std::size_t victim = indices_[0] == 0 && frames_.size() > 1 ? 1 : 0;
    frames_.erase(frames_.begin() + victim);
    indices_.erase(indices_.begin() + victim);
  }
}

template <class T>
bool memorize(MemoryBank<T>& bank, int frame_id, const Tensor<T>& key_flat,
              const Tensor<T>& value_flat, int every_r) {
  if (every_r < 1) throw std::invalid_argument("memorize: every_r must be >= 1");
  if (frame_id != 0 && frame_id % every_r != 0) return false;
  bank.insert(frame_id, key_flat, value_flat);
  return true;
}

#define GSFM_INSTANTIATE(T)                                                 \
  template Tensor<T> affinity<T>(const Tensor<T>&, const Tensor<T>&);       \
  template Tensor<T> topk_normalize<T>(const Tensor<T>&, std::size_t);      \
  template Tensor<T> readout<T>(const Tensor<T>&, const Tensor<T>&);        \
  template class MemoryBank<T>;                                             \
  template bool memorize<T>(MemoryBank<T>&, int, const Tensor<T>&,          \
                            const Tensor<T>&, int);

GSFM_INSTANTIATE(float)
GSFM_INSTANTIATE(double)
#undef GSFM_INSTANTIATE

}  // namespace gsfm
