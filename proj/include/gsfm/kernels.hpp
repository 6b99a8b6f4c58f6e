#pragma once

#include <cstddef>

#include "gsfm/tensor.hpp"

// Data-parallel inner loops. Every kernel exists twice: a plain serial
// reference under kern::serial and an OpenMP version under kern::par that
// splits work over *independent output elements only*, so the two produce
// bit-identical results for any thread count. The dispatch wrappers pick the
// OpenMP path when enabled at runtime.

namespace gsfm::kern {

bool parallel_enabled();
void set_parallel(bool on);
int thread_count();
void set_thread_count(int n);  // n <= 0 restores the OpenMP default

namespace serial {

template <class T>
void conv2d_forward(const T* x, const T* w, const T* bias, T* y,
                    std::size_t cin, std::size_t h, std::size_t wd,
                    std::size_t cout, std::size_t k, Padding pad);
template <class T>
void conv2d_backward_input(const T* gy, const T* w, T* gx,
                           std::size_t cin, std::size_t h, std::size_t wd,
                           std::size_t cout, std::size_t k, Padding pad);
template <class T>
void conv2d_backward_weight(const T* gy, const T* x, T* gw,
                            std::size_t cin, std::size_t h, std::size_t wd,
                            std::size_t cout, std::size_t k, Padding pad);

// batched 1-D transforms over the rows of `count` independent signals of
// length n laid out contiguously; radix-2 when n is a power of two, naive
// DFT otherwise. inverse applies conjugate twiddles and no scaling (the 2-D
// wrapper owns the 1/HW convention).
template <class T>
void dft1d_batch(T* re, T* im, std::size_t count, std::size_t n, bool inverse);

template <class T>
void affinity_forward(const T* q, const T* m, T* a,
                      std::size_t ck, std::size_t nq, std::size_t nm);
template <class T>
void affinity_backward(const T* ga, const T* q, const T* m, T* gq, T* gm,
                       std::size_t ck, std::size_t nq, std::size_t nm);

template <class T>
void readout_forward(const T* wgt, const T* v, T* out,
                     std::size_t cv, std::size_t nq, std::size_t nm);
template <class T>
void readout_backward(const T* gout, const T* wgt, const T* v, T* gw, T* gv,
                      std::size_t cv, std::size_t nq, std::size_t nm);

template <class T>
void upsample2x_forward(const T* x, T* y, std::size_t c, std::size_t h, std::size_t w);
template <class T>
void upsample2x_backward(const T* gy, T* gx, std::size_t c, std::size_t h, std::size_t w);

}  // namespace serial

namespace par {

template <class T>
void conv2d_forward(const T* x, const T* w, const T* bias, T* y,
                    std::size_t cin, std::size_t h, std::size_t wd,
                    std::size_t cout, std::size_t k, Padding pad);
template <class T>
void conv2d_backward_input(const T* gy, const T* w, T* gx,
                           std::size_t cin, std::size_t h, std::size_t wd,
                           std::size_t cout, std::size_t k, Padding pad);
template <class T>
void conv2d_backward_weight(const T* gy, const T* x, T* gw,
                            std::size_t cin, std::size_t h, std::size_t wd,
                            std::size_t cout, std::size_t k, Padding pad);
template <class T>
void dft1d_batch(T* re, T* im, std::size_t count, std::size_t n, bool inverse);
template <class T>
void affinity_forward(const T* q, const T* m, T* a,
                      std::size_t ck, std::size_t nq, std::size_t nm);
template <class T>
void affinity_backward(const T* ga, const T* q, const T* m, T* gq, T* gm,
                       std::size_t ck, std::size_t nq, std::size_t nm);
template <class T>
void readout_forward(const T* wgt, const T* v, T* out,
                     std::size_t cv, std::size_t nq, std::size_t nm);
template <class T>
void readout_backward(const T* gout, const T* wgt, const T* v, T* gw, T* gv,
                      std::size_t cv, std::size_t nq, std::size_t nm);
template <class T>
void upsample2x_forward(const T* x, T* y, std::size_t c, std::size_t h, std::size_t w);
template <class T>
void upsample2x_backward(const T* gy, T* gx, std::size_t c, std::size_t h, std::size_t w);

}  // namespace par

// runtime dispatch: par when parallel_enabled(), else serial

template <class T>
void conv2d_forward(const T* x, const T* w, const T* bias, T* y,
                    std::size_t cin, std::size_t h, std::size_t wd,
                    std::size_t cout, std::size_t k, Padding pad);
template <class T>
void conv2d_backward_input(const T* gy, const T* w, T* gx,
                           std::size_t cin, std::size_t h, std::size_t wd,
                           std::size_t cout, std::size_t k, Padding pad);
template <class T>
void conv2d_backward_weight(const T* gy, const T* x, T* gw,
                            std::size_t cin, std::size_t h, std::size_t wd,
                            std::size_t cout, std::size_t k, Padding pad);
template <class T>
void dft1d_batch(T* re, T* im, std::size_t count, std::size_t n, bool inverse);
template <class T>
void affinity_forward(const T* q, const T* m, T* a,
                      std::size_t ck, std::size_t nq, std::size_t nm);
template <class T>
void affinity_backward(const T* ga, const T* q, const T* m, T* gq, T* gm,
                       std::size_t ck, std::size_t nq, std::size_t nm);
template <class T>
void readout_forward(const T* wgt, const T* v, T* out,
                     std::size_t cv, std::size_t nq, std::size_t nm);
template <class T>
void readout_backward(const T* gout, const T* wgt, const T* v, T* gw, T* gv,
                      std::size_t cv, std::size_t nq, std::size_t nm);
template <class T>
void upsample2x_forward(const T* x, T* y, std::size_t c, std::size_t h, std::size_t w);
template <class T>
void upsample2x_backward(const T* gy, T* gx, std::size_t c, std::size_t h, std::size_t w);

}  // namespace gsfm::kern
