#include "flowgen/sampler/attention.hpp"

#include "flowgen/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace flowgen {

Tokens::Tokens(int count_, int dim_, double fill) : count(count_), dim(dim_) {
    if (count_ < 0 || dim_ < 0) throw ValidationError("tokens: negative shape");
    data.assign(static_cast<std::size_t>(count_) * dim_, fill);
}

Tokens::Tokens(int count_, int dim_, std::vector<double> values) : count(count_), dim(dim_), data(std::move(values)) {
    if (count_ < 0 || dim_ < 0) throw ValidationError("tokens: negative shape");
    if (data.size() != static_cast<std::size_t>(count_) * dim_) {
        throw ValidationError("tokens: value count does not match shape");
    }
}

namespace {

void validate(const AttentionInputs& in) {
    if (in.keys.empty()) throw ValidationError("mcfa_attention: attend list is empty");
    if (in.keys.size() != in.values.size()) {
        throw ValidationError("mcfa_attention: keys and values lists differ in length");
    }
    if (in.queries.count == 0 || in.queries.dim == 0) {
        throw ValidationError("mcfa_attention: queries must be non-empty with d_k > 0");
    }
    const int d_v = in.values.front().dim;
    for (std::size_t i = 0; i < in.keys.size(); ++i) {
        const Tokens& k = in.keys[i];
        const Tokens& v = in.values[i];
        if (k.dim != in.queries.dim) throw ValidationError("mcfa_attention: d_k mismatch");
        if (v.dim != d_v || d_v == 0) throw ValidationError("mcfa_attention: d_v mismatch");
        if (k.count == 0) throw ValidationError("mcfa_attention: empty key sequence");
        if (k.count != v.count) throw ValidationError("mcfa_attention: key/value lengths differ");
    }
}

} // namespace

Tokens attention_weights(const AttentionInputs& in) {
    validate(in);
    int total = 0;
    for (const Tokens& k : in.keys) total += k.count;
    const Tokens& q = in.queries;
    const double scale = 1.0 / std::sqrt(static_cast<double>(q.dim));

    Tokens w(q.count, total);
    for (int i = 0; i < q.count; ++i) {
        int col = 0;
        double row_max = -std::numeric_limits<double>::infinity();
        for (const Tokens& k : in.keys) {
            for (int j = 0; j < k.count; ++j, ++col) {
                double dot = 0.0;
                for (int d = 0; d < q.dim; ++d) dot += q.at(i, d) * k.at(j, d);
                w.at(i, col) = dot * scale;
                row_max = std::max(row_max, w.at(i, col));
            }
        }
        double sum = 0.0;
        for (int j = 0; j < total; ++j) {
            w.at(i, j) = std::exp(w.at(i, j) - row_max);
            sum += w.at(i, j);
        }
        for (int j = 0; j < total; ++j) w.at(i, j) /= sum;
    }
    return w;
}

Tokens mcfa_attention(const AttentionInputs& in) {
    const Tokens w = attention_weights(in);
    const int d_v = in.values.front().dim;
    Tokens out(in.queries.count, d_v);
    for (int i = 0; i < out.count; ++i) {
        int col = 0;
        for (const Tokens& v : in.values) {
            for (int j = 0; j < v.count; ++j, ++col) {
                const double weight = w.at(i, col);
                for (int d = 0; d < d_v; ++d) out.at(i, d) += weight * v.at(j, d);
            }
        }
    }
    return out;
}

Tokens grid_tokens(const TensorGrid& grid) {
    const auto values = grid.data();
    return Tokens(static_cast<int>(grid.pixel_count()), grid.channels(),
                  std::vector<double>(values.begin(), values.end()));
}

TensorGrid tokens_to_grid(const Tokens& tokens, int width, int height) {
    if (static_cast<std::size_t>(tokens.count) != static_cast<std::size_t>(width) * height) {
        throw ValidationError("tokens_to_grid: token count does not match the grid size");
    }
    return TensorGrid(width, height, tokens.dim, tokens.data);
}

} // namespace flowgen
