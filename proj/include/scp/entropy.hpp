#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <unordered_map>
#include <vector>

#include "scp/octree.hpp"

namespace scp {

inline constexpr int kAlphabetSize = 255;             // symbols 1..255
inline constexpr std::uint32_t kFrequencyBudget = 1u << 16;

using SymbolProbabilities = std::array<double, kAlphabetSize>;  // [s - 1]

// Integer frequencies handed to the range coder: every entry >= 1 and
// total <= kFrequencyBudget.
struct FrequencyTable {
  std::array<std::uint32_t, kAlphabetSize> freq{};
  std::uint32_t total = 0;
};

// Deterministic 16-bit quantization of an arbitrary probability vector.
FrequencyTable quantize_probabilities(const SymbolProbabilities& p);

// Seat for any occupancy-symbol predictor. Encoder and decoder must see the
// same (context, symbol) sequence and therefore the same predictions.
class ProbabilityModel {
public:
  virtual ~ProbabilityModel() = default;

  virtual SymbolProbabilities predict(const NodeContext& ctx) const = 0;
  virtual FrequencyTable frequencies(const NodeContext& ctx) const {
    return quantize_probabilities(predict(ctx));
  }
  virtual void update(const NodeContext& ctx, Symbol symbol) = 0;

  // -log2 p(symbol | ctx) under the current state.
  virtual double cost_bits(const NodeContext& ctx, Symbol symbol) const;

  virtual std::uint64_t state_hash() const = 0;
  // A new model in its initial state.
  virtual std::unique_ptr<ProbabilityModel> fresh() const = 0;
};

class UniformModel final : public ProbabilityModel {
public:
  SymbolProbabilities predict(const NodeContext& ctx) const override;
  FrequencyTable frequencies(const NodeContext& ctx) const override;
  void update(const NodeContext&, Symbol) override {}
  double cost_bits(const NodeContext& ctx, Symbol symbol) const override;
  std::uint64_t state_hash() const override { return 0; }
  std::unique_ptr<ProbabilityModel> fresh() const override;
};

// Laplace-smoothed symbol counts keyed by (parent occupancy, octant,
// min(level, 16)):  p(s) = (count(s) + alpha) / (total + 255 alpha).
//
// Counts of a context are halved (rounding down) once total + 255 alpha would
// exceed the 16-bit budget, so frequencies() is always exactly
// count(s) + alpha and the coder codes precisely what predict() claims.
class AdaptiveContextModel final : public ProbabilityModel {
public:
  explicit AdaptiveContextModel(std::uint32_t alpha = 1);

  SymbolProbabilities predict(const NodeContext& ctx) const override;
  FrequencyTable frequencies(const NodeContext& ctx) const override;
  void update(const NodeContext& ctx, Symbol symbol) override;
  double cost_bits(const NodeContext& ctx, Symbol symbol) const override;
  std::uint64_t state_hash() const override;
  std::unique_ptr<ProbabilityModel> fresh() const override;

  static std::uint32_t context_key(const NodeContext& ctx);
  std::size_t context_count() const { return tables_.size(); }
  // Total count currently held for the context of ctx (0 when unseen).
  std::uint32_t total(const NodeContext& ctx) const;

private:
  struct Table {
    std::array<std::uint32_t, kAlphabetSize> count{};
    std::uint32_t total = 0;
  };

  const Table* find(const NodeContext& ctx) const;

  std::uint32_t alpha_;
  std::unordered_map<std::uint32_t, Table> tables_;
};

struct Bitstream {
  std::vector<std::uint8_t> bytes;
  std::uint64_t bit_len = 0;  // always 8 * bytes.size() for this coder
};

// 32-bit range coder with carry propagation and byte-wise renormalization
// (range kept >= 2^24). finish() emits the five flush bytes.
class RangeEncoder {
public:
  void encode(std::uint32_t cum, std::uint32_t freq, std::uint32_t total);
  std::vector<std::uint8_t> finish();

private:
  void shift_low();

  std::uint64_t low_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint8_t cache_ = 0;
  std::uint64_t cache_size_ = 1;
  std::vector<std::uint8_t> out_;
};

class RangeDecoder {
public:
  explicit RangeDecoder(std::span<const std::uint8_t> bytes);

  // Target frequency in [0, total); throws ErrorKind::corrupt_stream when the
  // code value falls outside.
  std::uint32_t decode_freq(std::uint32_t total);
  void consume(std::uint32_t cum, std::uint32_t freq);

private:
  std::uint8_t next_byte();

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  std::uint32_t code_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint32_t step_ = 1;
};

// Codes one symbol at a time and updates the model after each.
class SymbolEncoder {
public:
  explicit SymbolEncoder(ProbabilityModel& model) : model_(model) {}
  void encode(const NodeContext& ctx, Symbol symbol);
  Bitstream finish();

private:
  ProbabilityModel& model_;
  RangeEncoder coder_;
};

class SymbolDecoder {
public:
  SymbolDecoder(std::span<const std::uint8_t> bytes, ProbabilityModel& model)
    : model_(model), coder_(bytes) {}
  Symbol decode(const NodeContext& ctx);

private:
  ProbabilityModel& model_;
  RangeDecoder coder_;
};

Bitstream encode(std::span<const StreamEntry> stream, ProbabilityModel& model);

// `context_of` receives the symbols decoded so far and returns the context of
// the next one.
std::vector<Symbol> decode(
    const Bitstream& bs, ProbabilityModel& model, std::size_t count,
    const std::function<NodeContext(std::span<const Symbol>)>& context_of);

// Ideal adaptive code length in bits: sum of -log2 p(x_i | C_i), updating the
// model after each symbol exactly as encode() does.
double cross_entropy(std::span<const StreamEntry> stream, ProbabilityModel& model);

}  // namespace scp
