#pragma once
#include <cstring>

namespace beetag::nn {

// C(M,N) = A(M,K) * B(K,N); accumulates into C when acc is true.
// i-k-j loop order: the inner loop is a contiguous axpy that vectorizes.
template <typename T>
void gemm_nn(int M, int K, int N, const T* A, const T* B, T* C, bool acc = false) {
  for (int i = 0; i < M; ++i) {
    T* c = C + size_t(i) * N;
    if (!acc)
      for (int j = 0; j < N; ++j) c[j] = T(0);
    const T* a = A + size_t(i) * K;
    for (int k = 0; k < K; ++k) {
      T av = a[k];
      const T* b = B + size_t(k) * N;
      for (int j = 0; j < N; ++j) c[j] += av * b[j];
    }
  }
}

// C(M,N) = A(M,K) * B(N,K)^T; rows of both operands are contiguous dots.
template <typename T>
void gemm_nt(int M, int K, int N, const T* A, const T* B, T* C, bool acc = false) {
  for (int i = 0; i < M; ++i) {
    const T* a = A + size_t(i) * K;
    T* c = C + size_t(i) * N;
    for (int j = 0; j < N; ++j) {
      const T* b = B + size_t(j) * K;
      T s = acc ? c[j] : T(0);
      for (int k = 0; k < K; ++k) s += a[k] * b[k];
      c[j] = s;
    }
  }
}

// C(K,N) = A(M,K)^T * B(M,N)
template <typename T>
void gemm_tn(int M, int K, int N, const T* A, const T* B, T* C, bool acc = false) {
  if (!acc) std::memset(C, 0, sizeof(T) * size_t(K) * N);
  for (int i = 0; i < M; ++i) {
    const T* a = A + size_t(i) * K;
    const T* b = B + size_t(i) * N;
    for (int k = 0; k < K; ++k) {
      T av = a[k];
      T* c = C + size_t(k) * N;
      for (int j = 0; j < N; ++j) c[j] += av * b[j];
    }
  }
}

}  // namespace beetag::nn
