#pragma once

#include <array>
#include <cstddef>
#include <string_view>

namespace cas {

inline constexpr std::size_t kEmbeddingDim = 64;

using Embedding = std::array<float, kEmbeddingDim>;

/// Signed feature hashing over lowercase word tokens (maximal [a-z0-9] runs),
/// L2-normalized. Deterministic and dependency-free; identical strings embed
/// to cosine 1.0, which is all the similarity layer is allowed to rely on.
/// Empty or token-free text gives the zero vector.
Embedding embed(std::string_view text);

double cosine(const Embedding& a, const Embedding& b);

}  // namespace cas
