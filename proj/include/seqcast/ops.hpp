#pragma once

#include <cstdint>
#include <vector>

#include "seqcast/tensor.hpp"

namespace seqcast {

using Mask = std::vector<std::uint8_t>;

// ---------------------------------------------------------------------------
// Differentiable array operations. All inputs must live on the same tape.
// Shapes are checked eagerly; mismatches raise numeric errors naming both
// shapes.
// ---------------------------------------------------------------------------

Tensor matmul(Tensor a, Tensor b);                       // [m,k]x[k,n] -> [m,n]
Tensor linear(Tensor x, Tensor w, Tensor b = Tensor()); // [n,i]x[i,o] + bias[o]
Tensor add(Tensor a, Tensor b);
Tensor mul(Tensor a, Tensor b);
Tensor scale(Tensor a, double s);
Tensor add_row_broadcast(Tensor x, Tensor row);          // [n,d] + [d]
Tensor repeat_row(Tensor row, std::size_t n);            // [d] -> [n,d]

Tensor relu(Tensor x);
Tensor gelu(Tensor x);
Tensor silu(Tensor x);
Tensor dropout(Tensor x, double rate);                   // uses tape rng; rate 0 is identity

// Per-row normalization with epsilon inside the square root.
Tensor layer_norm(Tensor x, Tensor gain, Tensor bias, double eps = 1e-5);

Tensor softmax(Tensor logits);                           // rank-1
Tensor masked_softmax_rows(Tensor logits, const Mask& key_valid); // [n,m]; invalid columns exactly 0

// Multi-head scaled dot-product attention over row-token matrices. Invalid
// keys are excluded from the softmax entirely (exact zero weight); invalid
// queries produce zero rows. With exact_reduction the key-axis sums use exact
// accumulation, making the op bit-exactly permutation-equivariant.
Tensor masked_attention(Tensor q, Tensor k, Tensor v, const Mask& key_valid,
                        const Mask& query_valid, std::size_t heads,
                        bool exact_reduction = false);

Tensor concat_rows(const std::vector<Tensor>& parts);    // rank-2, same cols
Tensor stack_rows(const std::vector<Tensor>& rows);      // rank-1 [d] each -> [n,d]
Tensor gather_rows(Tensor x, std::vector<std::size_t> idx);
Tensor gather_elements(Tensor x, std::vector<std::size_t> idx); // flat indices -> rank-1
Tensor row(Tensor x, std::size_t i);                     // [n,d] -> [d]

Tensor masked_max_rows(Tensor x, const Mask& valid);     // [p,d] -> [d], max over valid rows
Tensor masked_mean_rows(Tensor x, const Mask& valid);    // [p,d] -> [d]
Tensor mean_all(Tensor x);                               // scalar
Tensor sum_all(Tensor x);                                // scalar
Tensor mean_scalars(const std::vector<Tensor>& xs);      // mean of scalar tensors

Tensor zero_invalid_rows(Tensor x, const Mask& valid);
Tensor reshape(Tensor x, Shape shape); // same element count

// Rigid 2-D transform of point rows: out = R(angle) * p + t.
Tensor rigid_transform_rows(Tensor pts, double angle, double tx, double ty);

Tensor smooth_l1(Tensor pred, Tensor target, double beta = 1.0); // scalar mean
Tensor cross_entropy(Tensor logits, std::size_t target_index);   // scalar

// ---------------------------------------------------------------------------
// Raw kernels (exposed for reuse and benchmarking).
// ---------------------------------------------------------------------------
namespace kern {
// C[m,n] += A[m,k] * B[k,n]
void gemm_ab(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n);
// C[k,n] += A[m,k]^T * B[m,n]
void gemm_atb(const double* a, const double* b, double* c, std::size_t m,
              std::size_t k, std::size_t n);
// C[m,k] += A[m,n] * B[k,n]^T
void gemm_abt(const double* a, const double* b, double* c, std::size_t m,
              std::size_t n, std::size_t k);
} // namespace kern

} // namespace seqcast
