#pragma once

#include <cstddef>
#include <span>

// Dense matrix products used by the autodiff tape. Every kernel exists twice:
// a straightforward serial reference and an OpenMP version parallel over
// output rows. Both accumulate each output element over the inner index in
// ascending order, so their results are bit-identical.
namespace udainv::kernels {

// C[m x n] = A[m x k] * B[k x n]
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n);
void matmul_reference(std::span<const double> a, std::span<const double> b, std::span<double> c,
                      std::size_t m, std::size_t k, std::size_t n);

// C[m x n] += A[m x k] * B[n x k]^T
void matmul_bt_acc(std::span<const double> a, std::span<const double> b, std::span<double> c,
                   std::size_t m, std::size_t k, std::size_t n);
void matmul_bt_acc_reference(std::span<const double> a, std::span<const double> b,
                             std::span<double> c, std::size_t m, std::size_t k, std::size_t n);

// C[k x n] += A[m x k]^T * B[m x n]
void matmul_at_acc(std::span<const double> a, std::span<const double> b, std::span<double> c,
                   std::size_t m, std::size_t k, std::size_t n);
void matmul_at_acc_reference(std::span<const double> a, std::span<const double> b,
                             std::span<double> c, std::size_t m, std::size_t k, std::size_t n);

}  // namespace udainv::kernels
