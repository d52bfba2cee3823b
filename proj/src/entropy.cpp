#include "scp/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "scp/error.hpp"

namespace scp {

namespace {

constexpr std::uint32_t kTop = 1u << 24;
constexpr int kLevelCap = 16;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

void check_symbol(Symbol s) {
  if (s == 0) fail(ErrorKind::argument, "occupancy symbol 0 cannot be coded");
}

}  // namespace

FrequencyTable quantize_probabilities(const SymbolProbabilities& p) {
  FrequencyTable t;
  const double spread = static_cast<double>(kFrequencyBudget - kAlphabetSize);
  for (int s = 0; s < kAlphabetSize; ++s) {
    const double v = std::clamp(p[s], 0.0, 1.0);
    t.freq[s] = 1 + static_cast<std::uint32_t>(std::floor(v * spread));
    t.total += t.freq[s];
  }
  // Rounding of a vector that sums slightly above one.
  while (t.total > kFrequencyBudget) {
    auto it = std::max_element(t.freq.begin(), t.freq.end());
    --*it;
    --t.total;
  }
  return t;
}

double ProbabilityModel::cost_bits(const NodeContext& ctx, Symbol symbol) const {
  check_symbol(symbol);
  return -std::log2(predict(ctx)[symbol - 1]);
}

// --- UniformModel ------------------------------------------------------------

SymbolProbabilities UniformModel::predict(const NodeContext&) const {
  SymbolProbabilities p;
  p.fill(1.0 / kAlphabetSize);
  return p;
}

FrequencyTable UniformModel::frequencies(const NodeContext&) const {
  FrequencyTable t;
  t.freq.fill(1);
  t.total = kAlphabetSize;
  return t;
}

double UniformModel::cost_bits(const NodeContext&, Symbol symbol) const {
  check_symbol(symbol);
  return std::log2(static_cast<double>(kAlphabetSize));
}

std::unique_ptr<ProbabilityModel> UniformModel::fresh() const {
  return std::make_unique<UniformModel>();
}

// --- AdaptiveContextModel ----------------------------------------------------

AdaptiveContextModel::AdaptiveContextModel(std::uint32_t alpha) : alpha_(alpha) {
  if (alpha_ < 1 || alpha_ * kAlphabetSize >= kFrequencyBudget / 2)
    fail(ErrorKind::argument, "smoothing constant out of range");
}

std::uint32_t AdaptiveContextModel::context_key(const NodeContext& ctx) {
  const std::uint32_t level = std::min<std::uint32_t>(ctx.level, kLevelCap);
  return (std::uint32_t{ctx.ancestors[0].occupancy} << 16) |
         (std::uint32_t{ctx.octant} << 8) | level;
}

const AdaptiveContextModel::Table* AdaptiveContextModel::find(const NodeContext& ctx) const {
  auto it = tables_.find(context_key(ctx));
  return it == tables_.end() ? nullptr : &it->second;
}

std::uint32_t AdaptiveContextModel::total(const NodeContext& ctx) const {
  const Table* t = find(ctx);
  return t ? t->total : 0;
}

SymbolProbabilities AdaptiveContextModel::predict(const NodeContext& ctx) const {
  SymbolProbabilities p;
  const Table* t = find(ctx);
  const double denom = (t ? t->total : 0) + static_cast<double>(alpha_) * kAlphabetSize;
  for (int s = 0; s < kAlphabetSize; ++s)
    p[s] = ((t ? t->count[s] : 0) + static_cast<double>(alpha_)) / denom;
  return p;
}

FrequencyTable AdaptiveContextModel::frequencies(const NodeContext& ctx) const {
  FrequencyTable f;
  const Table* t = find(ctx);
  for (int s = 0; s < kAlphabetSize; ++s) f.freq[s] = (t ? t->count[s] : 0) + alpha_;
  f.total = (t ? t->total : 0) + alpha_ * kAlphabetSize;
  return f;
}

double AdaptiveContextModel::cost_bits(const NodeContext& ctx, Symbol symbol) const {
  check_symbol(symbol);
  const Table* t = find(ctx);
  const double num = (t ? t->count[symbol - 1] : 0) + static_cast<double>(alpha_);
  const double denom = (t ? t->total : 0) + static_cast<double>(alpha_) * kAlphabetSize;
  return std::log2(denom) - std::log2(num);
}

void AdaptiveContextModel::update(const NodeContext& ctx, Symbol symbol) {
  check_symbol(symbol);
  Table& t = tables_[context_key(ctx)];
  ++t.count[symbol - 1];
  ++t.total;
  if (t.total + alpha_ * kAlphabetSize > kFrequencyBudget) {
    t.total = 0;
    for (auto& c : t.count) {
      c >>= 1;
      t.total += c;
    }
  }
}

std::uint64_t AdaptiveContextModel::state_hash() const {
  // Order-independent over the hash map.
  std::uint64_t h = splitmix64(tables_.size());
  for (const auto& [key, table] : tables_) {
    std::uint64_t th = splitmix64(key);
    for (auto c : table.count) th = splitmix64(th ^ c);
    h += splitmix64(th ^ table.total);
  }
  return h;
}

std::unique_ptr<ProbabilityModel> AdaptiveContextModel::fresh() const {
  return std::make_unique<AdaptiveContextModel>(alpha_);
}

// --- Range coder --------------------------------------------------------------

void RangeEncoder::encode(std::uint32_t cum, std::uint32_t freq, std::uint32_t total) {
  const std::uint32_t step = range_ / total;
  low_ += std::uint64_t{step} * cum;
  range_ = step * freq;
  while (range_ < kTop) {
    range_ <<= 8;
    shift_low();
  }
}

void RangeEncoder::shift_low() {
  if (static_cast<std::uint32_t>(low_) < 0xFF000000u || (low_ >> 32) != 0) {
    const auto carry = static_cast<std::uint8_t>(low_ >> 32);
    std::uint8_t pending = cache_;
    do {
      out_.push_back(static_cast<std::uint8_t>(pending + carry));
      pending = 0xFF;
    } while (--cache_size_ != 0);
    cache_ = static_cast<std::uint8_t>(static_cast<std::uint32_t>(low_) >> 24);
  }
  ++cache_size_;
  low_ = (low_ & 0x00FFFFFFu) << 8;
}

std::vector<std::uint8_t> RangeEncoder::finish() {
  for (int i = 0; i < 5; ++i) shift_low();
  return std::move(out_);
}

RangeDecoder::RangeDecoder(std::span<const std::uint8_t> bytes) : bytes_(bytes) {
  for (int i = 0; i < 5; ++i) code_ = (code_ << 8) | next_byte();
}

std::uint8_t RangeDecoder::next_byte() {
  if (pos_ >= bytes_.size())
    fail(ErrorKind::corrupt_stream,
         "bitstream exhausted at byte " + std::to_string(pos_));
  return bytes_[pos_++];
}

std::uint32_t RangeDecoder::decode_freq(std::uint32_t total) {
  step_ = range_ / total;
  const std::uint32_t value = code_ / step_;
  if (value >= total)
    fail(ErrorKind::corrupt_stream, "range decoder desynchronised at byte " +
                                        std::to_string(pos_));
  return value;
}

void RangeDecoder::consume(std::uint32_t cum, std::uint32_t freq) {
  code_ -= step_ * cum;
  range_ = step_ * freq;
  while (range_ < kTop) {
    code_ = (code_ << 8) | next_byte();
    range_ <<= 8;
  }
}

// --- Symbol coding -----------------------------------------------------------

void SymbolEncoder::encode(const NodeContext& ctx, Symbol symbol) {
  check_symbol(symbol);
  const FrequencyTable t = model_.frequencies(ctx);
  std::uint32_t cum = 0;
  for (int s = 0; s < symbol - 1; ++s) cum += t.freq[s];
  coder_.encode(cum, t.freq[symbol - 1], t.total);
  model_.update(ctx, symbol);
}

Bitstream SymbolEncoder::finish() {
  Bitstream bs;
  bs.bytes = coder_.finish();
  bs.bit_len = 8 * static_cast<std::uint64_t>(bs.bytes.size());
  return bs;
}

Symbol SymbolDecoder::decode(const NodeContext& ctx) {
  const FrequencyTable t = model_.frequencies(ctx);
  const std::uint32_t target = coder_.decode_freq(t.total);
  std::uint32_t cum = 0;
  int s = 0;
  while (cum + t.freq[s] <= target) cum += t.freq[s++];
  coder_.consume(cum, t.freq[s]);
  const auto symbol = static_cast<Symbol>(s + 1);
  model_.update(ctx, symbol);
  return symbol;
}

Bitstream encode(std::span<const StreamEntry> stream, ProbabilityModel& model) {
  SymbolEncoder enc(model);
  for (const auto& e : stream) enc.encode(e.context, e.symbol);
  return enc.finish();
}

std::vector<Symbol> decode(
    const Bitstream& bs, ProbabilityModel& model, std::size_t count,
    const std::function<NodeContext(std::span<const Symbol>)>& context_of) {
  SymbolDecoder dec(bs.bytes, model);
  std::vector<Symbol> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(dec.decode(context_of(out)));
  return out;
}

double cross_entropy(std::span<const StreamEntry> stream, ProbabilityModel& model) {
  double bits = 0;
  for (const auto& e : stream) {
    bits += model.cost_bits(e.context, e.symbol);
    model.update(e.context, e.symbol);
  }
  return bits;
}

}  // namespace scp
