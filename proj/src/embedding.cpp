#include "cas/embedding.hpp"

#include <cctype>
#include <cmath>
#include <cstdint>
#include <string>

namespace cas {

namespace {

std::uint64_t fnv1a_token(std::string_view token) {
  std::uint64_t h = 1469598103934665603ULL;
  for (char c : token) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

Embedding embed(std::string_view text) {
  Embedding v{};
  std::size_t i = 0;
  const std::size_t n = text.size();
  bool any = false;
  while (i < n) {
    while (i < n && !std::isalnum(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t start = i;
    std::string token;
    while (i < n && std::isalnum(static_cast<unsigned char>(text[i]))) {
      token.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(text[i]))));
      ++i;
    }
    if (i == start) continue;
    std::uint64_t h = fnv1a_token(token);
    std::size_t bucket = static_cast<std::size_t>(h % kEmbeddingDim);
    float sign = ((h >> 32) & 1u) ? 1.0f : -1.0f;
    v[bucket] += sign;
    any = true;
  }
  if (!any) return v;
  double norm2 = 0.0;
  for (float x : v) norm2 += static_cast<double>(x) * x;
  if (norm2 == 0.0) return v;  // tokens cancelled exactly
  float inv = static_cast<float>(1.0 / std::sqrt(norm2));
  for (float& x : v) x *= inv;
  return v;
}

double cosine(const Embedding& a, const Embedding& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < kEmbeddingDim; ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / std::sqrt(na * nb);
}

}  // namespace cas
