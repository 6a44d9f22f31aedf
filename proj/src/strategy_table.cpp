#include "mgsde/strategy_table.hpp"

#include <array>
#include <cstring>
#include <fstream>

#include "mgsde/error.hpp"
#include "mgsde/rng.hpp"

namespace mgsde {

namespace {

constexpr std::array<char, 4> kMagic{'M', 'G', 'S', 'T'};
constexpr std::uint32_t kFormatVersion = 1;

void put_u64(std::ostream& out, std::uint64_t v) {
  std::array<unsigned char, 8> bytes{};
  for (int k = 0; k < 8; ++k) bytes[k] = static_cast<unsigned char>(v >> (8 * k));
  out.write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

void put_u32(std::ostream& out, std::uint32_t v) {
  std::array<unsigned char, 4> bytes{};
  for (int k = 0; k < 4; ++k) bytes[k] = static_cast<unsigned char>(v >> (8 * k));
  out.write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

template <typename T>
T get_le(std::istream& in) {
  std::array<unsigned char, sizeof(T)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!in) fail(ErrorCode::io, "truncated strategy table header");
  T v = 0;
  for (std::size_t k = 0; k < sizeof(T); ++k) v |= static_cast<T>(bytes[k]) << (8 * k);
  return v;
}

}  // namespace

StrategyTable StrategyTable::from_actions(std::size_t n_agents, std::size_t n_states, std::uint64_t seed,
                                          std::vector<std::int8_t> a_plus, std::vector<std::int8_t> a_minus) {
  require(n_agents > 0 && n_states > 0, "strategy table needs N > 0 and P > 0");
  require(a_plus.size() == n_agents * n_states && a_minus.size() == n_agents * n_states,
          "strategy table action arrays must have N * P entries");
  for (std::size_t k = 0; k < a_plus.size(); ++k) {
    require((a_plus[k] == 1 || a_plus[k] == -1) && (a_minus[k] == 1 || a_minus[k] == -1),
            "strategy actions must be +1 or -1");
  }
  StrategyTable table;
  table.n_agents_ = n_agents;
  table.n_states_ = n_states;
  table.seed_ = seed;
  table.a_plus_ = std::move(a_plus);
  table.a_minus_ = std::move(a_minus);
  table.derive();
  return table;
}

void StrategyTable::derive() {
  xi_.resize(a_plus_.size());
  theta_.assign(n_states_, 0);
  for (std::size_t mu = 0; mu < n_states_; ++mu) {
    std::int32_t twice_theta = 0;
    for (std::size_t i = 0; i < n_agents_; ++i) {
      const auto k = mu * n_agents_ + i;
      xi_[k] = static_cast<std::int8_t>((a_plus_[k] - a_minus_[k]) / 2);
      twice_theta += a_plus_[k] + a_minus_[k];
    }
    theta_[mu] = twice_theta / 2;
  }
}

StrategyTable StrategyTable::negated() const {
  StrategyTable flipped = *this;
  for (auto& a : flipped.a_plus_) a = static_cast<std::int8_t>(-a);
  for (auto& a : flipped.a_minus_) a = static_cast<std::int8_t>(-a);
  flipped.derive();
  return flipped;
}

bool StrategyTable::consistent() const {
  StrategyTable copy = *this;
  copy.derive();
  return copy.xi_ == xi_ && copy.theta_ == theta_;
}

StrategyTable sample_strategies(const GameParams& params) {
  require(params.n_agents > 0, "sample_strategies: N must be positive");
  require(params.n_states > 0, "sample_strategies: P must be positive");
  const std::size_t count = params.n_agents * params.n_states;
  std::vector<std::int8_t> a_plus(count);
  std::vector<std::int8_t> a_minus(count);

  Rng rng(params.seed, 0);
  std::uint64_t bits = 0;
  int left = 0;
  for (std::size_t k = 0; k < count; ++k) {
    if (left == 0) {
      bits = rng.next_u64();
      left = 32;
    }
    a_plus[k] = (bits & 1u) ? 1 : -1;
    a_minus[k] = (bits & 2u) ? 1 : -1;
    bits >>= 2;
    --left;
  }
  return StrategyTable::from_actions(params.n_agents, params.n_states, params.seed, std::move(a_plus),
                                     std::move(a_minus));
}

void save_table(const StrategyTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io, "cannot open " + path.string() + " for writing");
  out.write(kMagic.data(), kMagic.size());
  put_u32(out, kFormatVersion);
  put_u64(out, table.n_agents());
  put_u64(out, table.n_states());
  put_u64(out, table.seed());

  const std::size_t n = table.n_agents();
  const std::size_t bit_count = 2 * n * table.n_states();
  std::vector<unsigned char> payload((bit_count + 7) / 8, 0);
  for (std::size_t mu = 0; mu < table.n_states(); ++mu) {
    const auto plus = table.plus_row(mu);
    const auto minus = table.minus_row(mu);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t bit = 2 * (mu * n + i);
      if (plus[i] > 0) payload[bit / 8] |= static_cast<unsigned char>(1u << (bit % 8));
      if (minus[i] > 0) payload[(bit + 1) / 8] |= static_cast<unsigned char>(1u << ((bit + 1) % 8));
    }
  }
  out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
  if (!out) fail(ErrorCode::io, "failed writing " + path.string());
}

StrategyTable load_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open " + path.string());
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) fail(ErrorCode::io, path.string() + " is not a strategy table file");
  const auto version = get_le<std::uint32_t>(in);
  if (version != kFormatVersion) fail(ErrorCode::io, "unsupported strategy table version " + std::to_string(version));
  const auto n = get_le<std::uint64_t>(in);
  const auto p = get_le<std::uint64_t>(in);
  const auto seed = get_le<std::uint64_t>(in);
  if (n == 0 || p == 0 || n > (1ULL << 24) || p > (1ULL << 24)) fail(ErrorCode::io, "corrupt strategy table dimensions");

  const std::size_t count = n * p;
  std::vector<unsigned char> payload((2 * count + 7) / 8);
  in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
  if (!in) fail(ErrorCode::io, "truncated strategy table payload in " + path.string());

  std::vector<std::int8_t> a_plus(count);
  std::vector<std::int8_t> a_minus(count);
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t bit = 2 * k;
    a_plus[k] = (payload[bit / 8] >> (bit % 8)) & 1u ? 1 : -1;
    a_minus[k] = (payload[(bit + 1) / 8] >> ((bit + 1) % 8)) & 1u ? 1 : -1;
  }
  return StrategyTable::from_actions(n, p, seed, std::move(a_plus), std::move(a_minus));
}

}  // namespace mgsde
