#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ghostlab/error.hpp"

namespace ghostlab {

/// Largest k with k! held exactly in 64 bits.
inline constexpr int kExactFactorialMax = 20;
/// Largest k accepted by factorial(); beyond this callers get OrderOverflow.
inline constexpr int kFactorialGuard = 40;
/// Largest n for which every S(n, k) is tabulated exactly.
inline constexpr int kStirlingMax = 20;

inline constexpr std::array<std::uint64_t, kExactFactorialMax + 1> kExactFactorials = [] {
  std::array<std::uint64_t, kExactFactorialMax + 1> table{};
  table[0] = 1;
  for (int k = 1; k <= kExactFactorialMax; ++k) table[k] = table[k - 1] * static_cast<std::uint64_t>(k);
  return table;
}();

inline std::uint64_t factorial_exact(int k) {
  if (k < 0) throw DomainError("factorial of negative integer " + std::to_string(k));
  if (k > kExactFactorialMax) throw OrderOverflow("exact factorial overflows 64 bits at k=" + std::to_string(k));
  return kExactFactorials[static_cast<std::size_t>(k)];
}

/// k! in extended precision: exact table up to 20!, then a running product.
inline long double factorial(int k) {
  if (k < 0) throw DomainError("factorial of negative integer " + std::to_string(k));
  if (k > kFactorialGuard)
    throw OrderOverflow("factorial order " + std::to_string(k) + " exceeds guard " + std::to_string(kFactorialGuard));
  if (k <= kExactFactorialMax) return static_cast<long double>(kExactFactorials[static_cast<std::size_t>(k)]);
  long double value = static_cast<long double>(kExactFactorials[kExactFactorialMax]);
  for (int j = kExactFactorialMax + 1; j <= k; ++j) value *= static_cast<long double>(j);
  return value;
}

/// Stirling numbers of the second kind S(n, k), exact.
inline std::uint64_t stirling2(int n, int k) {
  if (n < 0 || k < 0) throw DomainError("Stirling number with negative argument");
  if (n > kStirlingMax) throw OrderOverflow("Stirling number order " + std::to_string(n) + " exceeds exact table");
  if (k > n) return 0;
  // Row-by-row recurrence S(i, j) = j S(i-1, j) + S(i-1, j-1).
  std::vector<std::uint64_t> row(static_cast<std::size_t>(n) + 1, 0);
  row[0] = 1;
  for (int i = 1; i <= n; ++i) {
    for (int j = i; j >= 1; --j) row[j] = static_cast<std::uint64_t>(j) * row[j] + row[j - 1];
    row[0] = 0;
  }
  return row[static_cast<std::size_t>(k)];
}

/// x (x-1) ... (x-j+1); one for j = 0.
inline double falling_factorial(double x, int j) noexcept {
  double value = 1.0;
  for (int i = 0; i < j; ++i) value *= (x - i);
  return value;
}

}  // namespace ghostlab
