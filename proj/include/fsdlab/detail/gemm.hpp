#pragma once

#include <cstddef>

#if defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>
#define FSDLAB_GEMM_AVX2 1
#endif

namespace fsdlab::detail {

// C (M x N) = A (M x K) * B (K x N) [+ C], all row-major.
// Every C element is accumulated serially in k index order, in both the
// generic and the vectorized kernels, so results are bitwise reproducible
// for a given binary regardless of tile arrangement.

template <int MR, int NR, typename T>
inline void gemm_tile(const T* __restrict a, const T* __restrict b, T* __restrict c, int K,
                      std::size_t lda, std::size_t ldb, std::size_t ldc, bool accumulate) {
  T acc[MR][NR] = {};
  for (int k = 0; k < K; ++k) {
    const T* brow = b + static_cast<std::size_t>(k) * ldb;
    for (int i = 0; i < MR; ++i) {
      T av = a[static_cast<std::size_t>(i) * lda + k];
      for (int j = 0; j < NR; ++j) acc[i][j] += av * brow[j];
    }
  }
  for (int i = 0; i < MR; ++i) {
    T* crow = c + static_cast<std::size_t>(i) * ldc;
    for (int j = 0; j < NR; ++j) crow[j] = accumulate ? crow[j] + acc[i][j] : acc[i][j];
  }
}

template <typename T>
inline void gemm_edge(const T* a, const T* b, T* c, int M, int K, int N, std::size_t lda,
                      std::size_t ldb, std::size_t ldc, bool accumulate) {
  for (int i = 0; i < M; ++i) {
    for (int j = 0; j < N; ++j) {
      T acc = T(0);
      for (int k = 0; k < K; ++k)
        acc += a[static_cast<std::size_t>(i) * lda + k] * b[static_cast<std::size_t>(k) * ldb + j];
      T& dst = c[static_cast<std::size_t>(i) * ldc + j];
      dst = accumulate ? dst + acc : acc;
    }
  }
}

#ifdef FSDLAB_GEMM_AVX2

// 6x16 float micro-kernel: 12 ymm accumulators, 2 B loads and 6 broadcasts
// per k step. Lane (i, j) still sees its products in plain k order.
inline void gemm_tile_f6x16(const float* __restrict a, const float* __restrict b,
                            float* __restrict c, int K, std::size_t lda, std::size_t ldb,
                            std::size_t ldc, bool accumulate) {
  __m256 acc[6][2];
  for (int i = 0; i < 6; ++i)
    for (int v = 0; v < 2; ++v) acc[i][v] = _mm256_setzero_ps();
  for (int k = 0; k < K; ++k) {
    const float* brow = b + static_cast<std::size_t>(k) * ldb;
    const __m256 b0 = _mm256_loadu_ps(brow);
    const __m256 b1 = _mm256_loadu_ps(brow + 8);
    for (int i = 0; i < 6; ++i) {
      const __m256 av = _mm256_set1_ps(a[static_cast<std::size_t>(i) * lda + k]);
      acc[i][0] = _mm256_fmadd_ps(av, b0, acc[i][0]);
      acc[i][1] = _mm256_fmadd_ps(av, b1, acc[i][1]);
    }
  }
  for (int i = 0; i < 6; ++i) {
    float* crow = c + static_cast<std::size_t>(i) * ldc;
    if (accumulate) {
      _mm256_storeu_ps(crow, _mm256_add_ps(_mm256_loadu_ps(crow), acc[i][0]));
      _mm256_storeu_ps(crow + 8, _mm256_add_ps(_mm256_loadu_ps(crow + 8), acc[i][1]));
    } else {
      _mm256_storeu_ps(crow, acc[i][0]);
      _mm256_storeu_ps(crow + 8, acc[i][1]);
    }
  }
}

// Remaining 1..5 rows with full 16-wide columns.
template <int MR>
inline void gemm_tile_fx16(const float* __restrict a, const float* __restrict b,
                           float* __restrict c, int K, std::size_t lda, std::size_t ldb,
                           std::size_t ldc, bool accumulate) {
  __m256 acc[MR][2];
  for (int i = 0; i < MR; ++i)
    for (int v = 0; v < 2; ++v) acc[i][v] = _mm256_setzero_ps();
  for (int k = 0; k < K; ++k) {
    const float* brow = b + static_cast<std::size_t>(k) * ldb;
    const __m256 b0 = _mm256_loadu_ps(brow);
    const __m256 b1 = _mm256_loadu_ps(brow + 8);
    for (int i = 0; i < MR; ++i) {
      const __m256 av = _mm256_set1_ps(a[static_cast<std::size_t>(i) * lda + k]);
      acc[i][0] = _mm256_fmadd_ps(av, b0, acc[i][0]);
      acc[i][1] = _mm256_fmadd_ps(av, b1, acc[i][1]);
    }
  }
  for (int i = 0; i < MR; ++i) {
    float* crow = c + static_cast<std::size_t>(i) * ldc;
    if (accumulate) {
      _mm256_storeu_ps(crow, _mm256_add_ps(_mm256_loadu_ps(crow), acc[i][0]));
      _mm256_storeu_ps(crow + 8, _mm256_add_ps(_mm256_loadu_ps(crow + 8), acc[i][1]));
    } else {
      _mm256_storeu_ps(crow, acc[i][0]);
      _mm256_storeu_ps(crow + 8, acc[i][1]);
    }
  }
}

inline void gemm_impl(const float* a, const float* b, float* c, int M, int K, int N,
                      bool accumulate) {
  constexpr int MR = 6, NR = 16;
  const int n_main = N - N % NR;
  int i = 0;
  for (; i + MR <= M; i += MR) {
    for (int j = 0; j < n_main; j += NR)
      gemm_tile_f6x16(a + static_cast<std::size_t>(i) * K, b + j,
                      c + static_cast<std::size_t>(i) * N + j, K, K, N, N, accumulate);
    if (n_main < N)
      gemm_edge(a + static_cast<std::size_t>(i) * K, b + n_main,
                c + static_cast<std::size_t>(i) * N + n_main, MR, K, N - n_main, K, N, N,
                accumulate);
  }
  const int rem = M - i;
  if (rem > 0) {
    const float* ar = a + static_cast<std::size_t>(i) * K;
    float* cr = c + static_cast<std::size_t>(i) * N;
    for (int j = 0; j < n_main; j += NR) {
      switch (rem) {
        case 1: gemm_tile_fx16<1>(ar, b + j, cr + j, K, K, N, N, accumulate); break;
        case 2: gemm_tile_fx16<2>(ar, b + j, cr + j, K, K, N, N, accumulate); break;
        case 3: gemm_tile_fx16<3>(ar, b + j, cr + j, K, K, N, N, accumulate); break;
        case 4: gemm_tile_fx16<4>(ar, b + j, cr + j, K, K, N, N, accumulate); break;
        default: gemm_tile_fx16<5>(ar, b + j, cr + j, K, K, N, N, accumulate); break;
      }
    }
    if (n_main < N)
      gemm_edge(ar, b + n_main, cr + n_main, rem, K, N - n_main, K, N, N, accumulate);
  }
}

#endif  // FSDLAB_GEMM_AVX2

template <typename T>
inline void gemm_impl(const T* a, const T* b, T* c, int M, int K, int N, bool accumulate) {
  constexpr int MR = 4, NR = 16;
  const int m_main = M - M % MR;
  const int n_main = N - N % NR;
  for (int i = 0; i < m_main; i += MR) {
    for (int j = 0; j < n_main; j += NR) {
      gemm_tile<MR, NR>(a + static_cast<std::size_t>(i) * K, b + j,
                        c + static_cast<std::size_t>(i) * N + j, K, K, N, N, accumulate);
    }
    if (n_main < N)
      gemm_edge(a + static_cast<std::size_t>(i) * K, b + n_main,
                c + static_cast<std::size_t>(i) * N + n_main, MR, K, N - n_main, K, N, N,
                accumulate);
  }
  if (m_main < M)
    gemm_edge(a + static_cast<std::size_t>(m_main) * K, b,
              c + static_cast<std::size_t>(m_main) * N, M - m_main, K, N, K, N, N, accumulate);
}

template <typename T>
inline void gemm(const T* a, const T* b, T* c, int M, int K, int N, bool accumulate = false) {
  gemm_impl(a, b, c, M, K, N, accumulate);
}

}  // namespace fsdlab::detail
