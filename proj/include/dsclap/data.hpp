#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>
#include <tuple>
#include <vector>

#include "dsclap/encoders.hpp"
#include "dsclap/errors.hpp"
#include "dsclap/random.hpp"

namespace dsclap {

// ============================================================================
// Domain types
// ============================================================================

enum class Source { asr, manual };

inline std::string_view to_string(Source s) {
  return s == Source::asr ? "asr" : "manual";
}

struct PairedSample {
  std::string id;
  Waveform audio;
  TokenSequence text;
  std::optional<int> label;  // present only for downstream task data
  Source source = Source::manual;

  bool operator==(const PairedSample&) const = default;
};

struct SplitSpec {
  std::size_t train = 0;
  std::size_t valid = 0;
  std::size_t test = 0;
};

struct CerReport {
  std::size_t reference_length = 0;
  std::size_t edit_distance = 0;
  double cer = 0.0;
};

/// Knobs for the synthetic corpus. Every class gets its own tone frequency,
/// amplitude, and token template, so both modalities carry the class and the
/// contrastive objective has real cross-modal signal to find.
struct GeneratorConfig {
  std::size_t vocab_size = 64;
  std::size_t template_min = 6;   // class token template length range
  std::size_t template_max = 12;
  double token_variation = 0.1;   // per-position resample probability
  std::size_t audio_len_base = 1600;
  std::size_t audio_len_jitter = 160;
  double noise_level = 0.03;      // additive gaussian on the waveform
  double latent_noise = 0.25;     // per-sample spread around the class latent
  bool labeled = false;           // attach the class id as the label
};

// ============================================================================
// Numeric text round-trip
// ============================================================================

namespace detail {

/// Formats with 9 significant digits, the on-disk precision. Values that
/// already came through this function re-encode to the same string, so a
/// second round-trip is exact.
inline std::string format_sample(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v,
                           std::chars_format::general, 9);
  return std::string(buf, res.ptr);
}

inline double quantize_sample(double v) {
  std::string text = format_sample(v);
  double out = 0.0;
  std::from_chars(text.data(), text.data() + text.size(), out);
  return out;
}

}  // namespace detail

// ============================================================================
// Synthetic generation
// ============================================================================

namespace detail {

struct ClassPrototype {
  double frequency = 0.0;  // cycles per sample
  double amplitude = 0.0;
  std::vector<std::uint32_t> template_tokens;
  Vec latent;
};

inline ClassPrototype make_class_prototype(std::uint64_t seed, std::size_t c,
                                           std::size_t class_count,
                                           std::size_t latent_dim,
                                           const GeneratorConfig& cfg) {
  ClassPrototype proto;
  // Spread the fundamentals across (0.04, 0.42) cycles/sample, safely below
  // Nyquist even with the second harmonic.
  proto.frequency = 0.04 + 0.38 * (static_cast<double>(c) + 0.5) /
                               static_cast<double>(class_count);
  // Golden-ratio striding decorrelates amplitude from frequency order.
  double frac = std::fmod(static_cast<double>(c + 1) * 0.618034, 1.0);
  proto.amplitude = 0.5 + 0.9 * frac;

  Rng rng(derive_seed(seed, "class", static_cast<std::uint64_t>(c)));
  std::size_t span = cfg.template_max - cfg.template_min + 1;
  std::size_t len = cfg.template_min + rng.below(span);
  proto.template_tokens.resize(len);
  for (auto& tok : proto.template_tokens)
    tok = static_cast<std::uint32_t>(rng.below(cfg.vocab_size));
  proto.latent.resize(latent_dim);
  for (double& v : proto.latent) v = rng.gaussian();
  return proto;
}

}  // namespace detail

/// Deterministic paired corpus: sample i depends only on (seed, its id), so
/// generation order and worker count never change the result.
inline std::vector<PairedSample> generate_pairs(std::uint64_t seed,
                                                std::size_t n,
                                                std::size_t class_count,
                                                std::size_t latent_dim,
                                                const GeneratorConfig& cfg = {}) {
  if (n < 1) throw InvalidArgument("sample count must be positive");
  if (class_count < 1) throw InvalidArgument("class count must be positive");
  if (latent_dim < 1) throw InvalidArgument("latent dimension must be positive");
  if (cfg.vocab_size < 2) throw InvalidArgument("vocabulary too small");
  if (cfg.template_min < 1 || cfg.template_max < cfg.template_min)
    throw InvalidArgument("invalid template length range");
  if (cfg.audio_len_base <= cfg.audio_len_jitter)
    throw InvalidArgument("invalid audio length range");

  std::vector<detail::ClassPrototype> protos;
  protos.reserve(class_count);
  for (std::size_t c = 0; c < class_count; ++c)
    protos.push_back(
        detail::make_class_prototype(seed, c, class_count, latent_dim, cfg));

  std::vector<PairedSample> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    PairedSample& sample = out[i];
    char idbuf[24];
    std::snprintf(idbuf, sizeof(idbuf), "p%06zu", i);
    sample.id = idbuf;
    sample.source = Source::manual;

    Rng rng(derive_seed(seed, sample.id));
    std::size_t cls = rng.below(class_count);
    const detail::ClassPrototype& proto = protos[cls];
    if (cfg.labeled) sample.label = static_cast<int>(cls);

    Vec latent(latent_dim);
    for (std::size_t d = 0; d < latent_dim; ++d)
      latent[d] = proto.latent[d] + cfg.latent_noise * rng.gaussian();

    // The latent perturbs loudness and detunes the pitch a little, so
    // within-class samples vary without crossing class boundaries.
    double amp = proto.amplitude * (1.0 + 0.15 * std::tanh(latent[0]));
    double freq =
        proto.frequency * (1.0 + 0.01 * std::tanh(latent[1 % latent_dim]));
    double phase1 = rng.uniform(0.0, 2.0 * std::numbers::pi);
    double phase2 = rng.uniform(0.0, 2.0 * std::numbers::pi);
    std::size_t len =
        cfg.audio_len_base - cfg.audio_len_jitter + rng.below(2 * cfg.audio_len_jitter + 1);

    sample.audio.samples.resize(len);
    double omega = 2.0 * std::numbers::pi * freq;
    for (std::size_t t = 0; t < len; ++t) {
      double x = amp * std::sin(omega * static_cast<double>(t) + phase1) +
                 0.35 * amp *
                     std::sin(2.0 * omega * static_cast<double>(t) + phase2) +
                 cfg.noise_level * rng.gaussian();
      // Quantized at generation time so disk round-trips are exact.
      sample.audio.samples[t] = detail::quantize_sample(x);
    }

    sample.text.tokens = proto.template_tokens;
    for (auto& tok : sample.text.tokens) {
      if (rng.uniform() < cfg.token_variation)
        tok = static_cast<std::uint32_t>(rng.below(cfg.vocab_size));
    }
  }
  return out;
}

// ============================================================================
// CER corruption and measurement
// ============================================================================

/// ASR-style corruption: per reference token, an edit fires with probability
/// target_cer and is a substitution / insertion / deletion with odds
/// 70/15/15. Deterministic in the seed; output truncated to max_len.
inline TokenSequence inject_cer(const TokenSequence& text, double target_cer,
                                std::uint64_t seed,
                                std::size_t vocab_size = 64,
                                std::size_t max_len = 16) {
  if (!(target_cer >= 0.0 && target_cer <= 1.0))
    throw InvalidArgument("target CER must be in [0, 1]");
  if (vocab_size < 2) throw InvalidArgument("vocabulary too small");

  Rng rng(seed);
  TokenSequence out;
  out.tokens.reserve(text.tokens.size() + 4);
  for (std::size_t i = 0; i < text.tokens.size(); ++i) {
    std::uint32_t tok = text.tokens[i];
    if (rng.uniform() >= target_cer) {
      out.tokens.push_back(tok);
      continue;
    }
    double kind = rng.uniform();
    if (kind < 0.70) {
      // Substitution: any token other than the original.
      std::uint32_t sub =
          static_cast<std::uint32_t>(rng.below(vocab_size - 1));
      if (sub >= tok) ++sub;
      out.tokens.push_back(sub);
    } else if (kind < 0.85) {
      out.tokens.push_back(static_cast<std::uint32_t>(rng.below(vocab_size)));
      out.tokens.push_back(tok);
    } else {
      // Deletion, unless it would empty the output; then substitute so the
      // result stays encodable.
      bool last = (i + 1 == text.tokens.size());
      if (last && out.tokens.empty()) {
        std::uint32_t sub =
            static_cast<std::uint32_t>(rng.below(vocab_size - 1));
        if (sub >= tok) ++sub;
        out.tokens.push_back(sub);
      }
    }
  }
  if (out.tokens.size() > max_len) out.tokens.resize(max_len);
  return out;
}

/// Unit-cost Levenshtein distance over reference length.
inline CerReport measure_cer(const TokenSequence& reference,
                             const TokenSequence& hypothesis) {
  if (reference.tokens.empty()) throw InvalidArgument("undefined CER");
  const auto& ref = reference.tokens;
  const auto& hyp = hypothesis.tokens;

  std::vector<std::size_t> prev(hyp.size() + 1), cur(hyp.size() + 1);
  for (std::size_t j = 0; j <= hyp.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= ref.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= hyp.size(); ++j) {
      std::size_t sub = prev[j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }

  CerReport report;
  report.reference_length = ref.size();
  report.edit_distance = prev[hyp.size()];
  report.cer = static_cast<double>(report.edit_distance) /
               static_cast<double>(report.reference_length);
  return report;
}

// ============================================================================
// Splits
// ============================================================================

/// Deterministic shuffled partition into train/valid/test.
inline std::tuple<std::vector<PairedSample>, std::vector<PairedSample>,
                  std::vector<PairedSample>>
split_dataset(const std::vector<PairedSample>& data, const SplitSpec& spec,
              std::uint64_t seed) {
  if (spec.train + spec.valid + spec.test != data.size())
    throw InvalidArgument("split counts do not sum to dataset size");

  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed(seed, "split"));
  rng.shuffle(order);

  auto take = [&](std::size_t begin, std::size_t count) {
    std::vector<PairedSample> part;
    part.reserve(count);
    for (std::size_t i = 0; i < count; ++i) part.push_back(data[order[begin + i]]);
    return part;
  };
  return {take(0, spec.train), take(spec.train, spec.valid),
          take(spec.train + spec.valid, spec.test)};
}

// ============================================================================
// On-disk format
// ============================================================================
//
// Line-delimited UTF-8. Line 1 is the header `dsclap-dataset v1`; each
// following line is one record with tab-separated fields in fixed order:
// id, source, label (empty when absent), text_tokens (space-separated),
// audio (space-separated decimal, 9 significant digits).

inline constexpr std::string_view kDatasetHeader = "dsclap-dataset v1";

namespace detail {

inline DataFormatError record_error(std::size_t line, std::string_view field,
                                    std::string_view what) {
  std::string msg = "line " + std::to_string(line) + ": " + std::string(what) +
                    " in field '" + std::string(field) + "'";
  return DataFormatError(msg);
}

}  // namespace detail

inline void write_dataset(const std::string& path,
                          const std::vector<PairedSample>& samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataFormatError("cannot open file for writing: " + path);

  out << kDatasetHeader << '\n';
  for (const PairedSample& s : samples) {
    if (s.id.empty() || s.id.find_first_of("\t\n\r") != std::string::npos)
      throw InvalidArgument("sample id must be non-empty and tab-free");
    if (s.text.tokens.empty() || s.audio.samples.empty())
      throw InvalidArgument("empty input");

    out << s.id << '\t' << to_string(s.source) << '\t';
    if (s.label) out << *s.label;
    out << '\t';
    for (std::size_t i = 0; i < s.text.tokens.size(); ++i) {
      if (i) out << ' ';
      out << s.text.tokens[i];
    }
    out << '\t';
    for (std::size_t i = 0; i < s.audio.samples.size(); ++i) {
      if (i) out << ' ';
      out << detail::format_sample(s.audio.samples[i]);
    }
    out << '\n';
  }
  if (!out) throw DataFormatError("write failed: " + path);
}

inline std::vector<PairedSample> read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataFormatError("cannot open file for reading: " + path);

  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line) || line != kDatasetHeader)
    throw DataFormatError("line 1: missing dataset header");

  std::vector<PairedSample> samples;
  while (std::getline(in, line)) {
    ++line_no;
    std::vector<std::string_view> fields;
    std::string_view rest = line;
    while (true) {
      std::size_t tab = rest.find('\t');
      if (tab == std::string_view::npos) {
        fields.push_back(rest);
        break;
      }
      fields.push_back(rest.substr(0, tab));
      rest.remove_prefix(tab + 1);
    }
    if (fields.size() != 5)
      throw DataFormatError("line " + std::to_string(line_no) +
                            ": expected 5 tab-separated fields, got " +
                            std::to_string(fields.size()));

    PairedSample s;
    if (fields[0].empty())
      throw detail::record_error(line_no, "id", "empty value");
    s.id = std::string(fields[0]);

    if (fields[1] == "asr") {
      s.source = Source::asr;
    } else if (fields[1] == "manual") {
      s.source = Source::manual;
    } else {
      throw detail::record_error(line_no, "source", "unknown value");
    }

    if (!fields[2].empty()) {
      int label = 0;
      auto res = std::from_chars(fields[2].data(),
                                 fields[2].data() + fields[2].size(), label);
      if (res.ec != std::errc{} || res.ptr != fields[2].data() + fields[2].size())
        throw detail::record_error(line_no, "label", "malformed integer");
      s.label = label;
    }

    auto split_spaces = [&](std::string_view text, std::string_view field,
                            auto&& parse_one) {
      if (text.empty())
        throw detail::record_error(line_no, field, "empty value");
      std::size_t pos = 0;
      while (pos <= text.size()) {
        std::size_t space = text.find(' ', pos);
        std::string_view piece = space == std::string_view::npos
                                     ? text.substr(pos)
                                     : text.substr(pos, space - pos);
        if (piece.empty())
          throw detail::record_error(line_no, field, "empty token");
        parse_one(piece);
        if (space == std::string_view::npos) break;
        pos = space + 1;
      }
    };

    split_spaces(fields[3], "text_tokens", [&](std::string_view piece) {
      std::uint32_t tok = 0;
      auto res =
          std::from_chars(piece.data(), piece.data() + piece.size(), tok);
      if (res.ec != std::errc{} || res.ptr != piece.data() + piece.size())
        throw detail::record_error(line_no, "text_tokens", "malformed integer");
      s.text.tokens.push_back(tok);
    });

    split_spaces(fields[4], "audio", [&](std::string_view piece) {
      double v = 0.0;
      auto res = std::from_chars(piece.data(), piece.data() + piece.size(), v);
      if (res.ec != std::errc{} || res.ptr != piece.data() + piece.size())
        throw detail::record_error(line_no, "audio", "malformed number");
      if (!std::isfinite(v))
        throw detail::record_error(line_no, "audio", "non-finite number");
      s.audio.samples.push_back(v);
    });

    samples.push_back(std::move(s));
  }
  return samples;
}

}  // namespace dsclap
