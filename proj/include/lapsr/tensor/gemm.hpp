#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

namespace lapsr::kernels {

enum class Trans { kNo, kYes };

namespace detail {

template <class T>
struct GemmTile {
  // Register tile: kMr rows of C by two 64-byte vectors of columns.
  static constexpr std::size_t kMr = 8;
  static constexpr std::size_t kNr = 128 / sizeof(T);
  // Column block kept hot in L2 while every row panel sweeps it.
  static constexpr std::size_t kNc = 8 * kNr;
  // Reduction depth per pass, bounding the packed panels' footprint.
  static constexpr std::size_t kKc = 384;
};

template <class T, std::size_t Mr, std::size_t Nr>
inline void micro_kernel(std::size_t k_len, const T* __restrict ap, const T* __restrict bp,
                         T* __restrict c, std::size_t ldc, std::size_t rows, std::size_t cols) {
  T acc[Mr][Nr] = {};
  for (std::size_t k = 0; k < k_len; ++k) {
    const T* b = bp + k * Nr;
    const T* a = ap + k * Mr;
    for (std::size_t r = 0; r < Mr; ++r) {
      const T av = a[r];
      for (std::size_t j = 0; j < Nr; ++j) acc[r][j] += av * b[j];
    }
  }
  if (rows == Mr && cols == Nr) {
    for (std::size_t r = 0; r < Mr; ++r)
      for (std::size_t j = 0; j < Nr; ++j) c[r * ldc + j] += acc[r][j];
  } else {
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < cols; ++j) c[r * ldc + j] += acc[r][j];
  }
}

}  // namespace detail

// C[M x N] += op(A)[M x K] * op(B)[K x N], row-major storage.
//
// Blocking is fixed at compile time, so every C element sees the same sequence
// of additions on every call: k ascending inside a register tile, one partial
// sum per kKc-deep pass, passes added to C in ascending order.
template <class T>
void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, const T* a,
          std::size_t lda, const T* b, std::size_t ldb, T* c, std::size_t ldc) {
  using Tile = detail::GemmTile<T>;
  constexpr std::size_t Mr = Tile::kMr, Nr = Tile::kNr, Nc = Tile::kNc;
  if (m == 0 || n == 0 || k == 0) return;

  constexpr std::size_t Kc = Tile::kKc;
  const std::size_t m_panels = (m + Mr - 1) / Mr;
  std::vector<T> ap(m_panels * Mr * std::min(Kc, k));
  std::vector<T> bp(Nc * std::min(Kc, k));

  for (std::size_t pc = 0; pc < k; pc += Kc) {
    const std::size_t kc = std::min(Kc, k - pc);
    for (std::size_t p = 0; p < m_panels; ++p) {
      T* dst = ap.data() + p * Mr * kc;
      for (std::size_t r = 0; r < Mr; ++r) {
        const std::size_t i = p * Mr + r;
        if (i >= m) {
          for (std::size_t kk = 0; kk < kc; ++kk) dst[kk * Mr + r] = T(0);
        } else if (ta == Trans::kNo) {
          const T* src = a + i * lda + pc;
          for (std::size_t kk = 0; kk < kc; ++kk) dst[kk * Mr + r] = src[kk];
        } else {
          for (std::size_t kk = 0; kk < kc; ++kk) dst[kk * Mr + r] = a[(pc + kk) * lda + i];
        }
      }
    }

    for (std::size_t jc = 0; jc < n; jc += Nc) {
      const std::size_t nc = std::min(Nc, n - jc);
      const std::size_t strips = (nc + Nr - 1) / Nr;
      for (std::size_t s = 0; s < strips; ++s) {
        T* dst = bp.data() + s * Nr * kc;
        const std::size_t j0 = jc + s * Nr;
        const std::size_t cols = std::min(Nr, n - j0);
        if (tb == Trans::kNo) {
          for (std::size_t kk = 0; kk < kc; ++kk) {
            T* row = dst + kk * Nr;
            const T* src = b + (pc + kk) * ldb + j0;
            for (std::size_t j = 0; j < cols; ++j) row[j] = src[j];
            for (std::size_t j = cols; j < Nr; ++j) row[j] = T(0);
          }
        } else {
          if (cols < Nr) std::fill(dst, dst + kc * Nr, T(0));
          for (std::size_t j = 0; j < cols; ++j) {
            const T* src = b + (j0 + j) * ldb + pc;
            for (std::size_t kk = 0; kk < kc; ++kk) dst[kk * Nr + j] = src[kk];
          }
        }
      }
      for (std::size_t p = 0; p < m_panels; ++p) {
        const std::size_t i0 = p * Mr;
        const std::size_t rows = std::min(Mr, m - i0);
        for (std::size_t s = 0; s < strips; ++s) {
          const std::size_t j0 = jc + s * Nr;
          detail::micro_kernel<T, Mr, Nr>(kc, ap.data() + p * Mr * kc, bp.data() + s * Nr * kc,
                                          c + i0 * ldc + j0, ldc, rows, std::min(Nr, n - j0));
        }
      }
    }
  }
}

}  // namespace lapsr::kernels
