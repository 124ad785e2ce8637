#pragma once

#include "flowgen/flow/grid.hpp"

#include <cstddef>
#include <vector>

namespace flowgen {

/// Row-major token matrix: `count` rows of `dim` features.
struct Tokens {
    int count = 0;
    int dim = 0;
    std::vector<double> data;

    Tokens() = default;
    Tokens(int count, int dim, double fill = 0.0);
    Tokens(int count, int dim, std::vector<double> values);

    double at(int row, int col) const { return data[static_cast<std::size_t>(row) * dim + col]; }
    double& at(int row, int col) { return data[static_cast<std::size_t>(row) * dim + col]; }

    friend bool operator==(const Tokens&, const Tokens&) = default;
};

/// Queries of the current frame plus one key/value pair per attended latent.
struct AttentionInputs {
    Tokens queries;
    std::vector<Tokens> keys;
    std::vector<Tokens> values;
};

/// Keys and values of every attended latent are concatenated along the sequence
/// axis, then softmax(Q K^T / sqrt(d_k)) V with the row maximum subtracted.
/// Throws ValidationError on an empty attend list, empty sequences, or
/// mismatched feature sizes.
Tokens mcfa_attention(const AttentionInputs& inputs);

/// The row-stochastic weight matrix used by mcfa_attention (queries x total keys).
Tokens attention_weights(const AttentionInputs& inputs);

/// One token per pixel with the channels as features, and back.
Tokens grid_tokens(const TensorGrid& grid);
TensorGrid tokens_to_grid(const Tokens& tokens, int width, int height);

} // namespace flowgen
