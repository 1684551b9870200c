#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <vector>

#include "dsclap/data.hpp"
#include "dsclap/errors.hpp"
#include "support/oracles.hpp"
#include "support/tempdir.hpp"

using namespace dsclap;

namespace {

GeneratorConfig fast_audio() {
  GeneratorConfig cfg;
  cfg.audio_len_base = 240;
  cfg.audio_len_jitter = 40;
  return cfg;
}

TokenSequence make_tokens(std::initializer_list<std::uint32_t> ids) {
  TokenSequence t;
  t.tokens = ids;
  return t;
}

/// Corpus-level CER: total edit distance over total reference length.
double corpus_cer(const std::vector<TokenSequence>& refs,
                  const std::vector<TokenSequence>& hyps) {
  std::size_t edits = 0;
  std::size_t length = 0;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    CerReport r = measure_cer(refs[i], hyps[i]);
    edits += r.edit_distance;
    length += r.reference_length;
  }
  return static_cast<double>(edits) / static_cast<double>(length);
}

}  // namespace

TEST_CASE("generate_pairs") {
  SECTION("bit-identical for the same seed") {
    auto a = generate_pairs(42, 20, 5, 3, fast_audio());
    auto b = generate_pairs(42, 20, 5, 3, fast_audio());
    REQUIRE(a == b);
  }

  SECTION("different seeds differ") {
    auto a = generate_pairs(42, 8, 5, 3, fast_audio());
    auto b = generate_pairs(43, 8, 5, 3, fast_audio());
    REQUIRE_FALSE(a == b);
  }

  SECTION("samples depend only on (seed, id), not on the batch size") {
    auto small = generate_pairs(7, 10, 4, 2, fast_audio());
    auto large = generate_pairs(7, 25, 4, 2, fast_audio());
    for (std::size_t i = 0; i < small.size(); ++i) REQUIRE(small[i] == large[i]);
  }

  SECTION("one class means one template family") {
    GeneratorConfig cfg = fast_audio();
    cfg.token_variation = 0.0;
    auto data = generate_pairs(9, 12, 1, 2, cfg);
    for (const PairedSample& s : data) REQUIRE(s.text == data[0].text);
  }

  SECTION("class histogram is uniform within binomial 3 sigma") {
    GeneratorConfig cfg = fast_audio();
    cfg.labeled = true;
    std::size_t n = 1000;
    std::size_t classes = 15;
    auto data = generate_pairs(11, n, classes, 4, cfg);

    std::vector<std::size_t> counts(classes, 0);
    for (const PairedSample& s : data) {
      REQUIRE(s.label.has_value());
      counts[static_cast<std::size_t>(*s.label)] += 1;
    }
    double p = 1.0 / static_cast<double>(classes);
    double mean = static_cast<double>(n) * p;
    double sigma = std::sqrt(static_cast<double>(n) * p * (1.0 - p));
    for (std::size_t c = 0; c < classes; ++c)
      REQUIRE(std::abs(static_cast<double>(counts[c]) - mean) <= 3.0 * sigma);
  }

  SECTION("outputs respect the encoder caps and format invariants") {
    auto data = generate_pairs(3, 40, 6, 3, fast_audio());
    EncoderConfig enc;  // defaults: vocab 64, max lens 16 / 80000
    for (std::size_t i = 0; i < data.size(); ++i) {
      const PairedSample& s = data[i];
      char expected_id[16];
      std::snprintf(expected_id, sizeof(expected_id), "p%06zu", i);
      REQUIRE(s.id == expected_id);
      REQUIRE(s.source == Source::manual);
      REQUIRE_FALSE(s.label.has_value());
      REQUIRE(s.audio.samples.size() >= 200);
      REQUIRE(s.audio.samples.size() <= enc.max_audio_len);
      REQUIRE(s.text.tokens.size() >= 6);
      REQUIRE(s.text.tokens.size() <= enc.max_text_len);
      for (std::uint32_t tok : s.text.tokens) REQUIRE(tok < 64);
      for (double v : s.audio.samples) REQUIRE(std::isfinite(v));
    }
  }

  SECTION("parameter validation") {
    REQUIRE_THROWS_AS(generate_pairs(1, 0, 3, 2), InvalidArgument);
    REQUIRE_THROWS_AS(generate_pairs(1, 3, 0, 2), InvalidArgument);
    REQUIRE_THROWS_AS(generate_pairs(1, 3, 3, 0), InvalidArgument);
  }

  SECTION("a linear probe on audio features recovers the class") {
    GeneratorConfig cfg;
    cfg.labeled = true;
    std::size_t classes = 15;
    auto data = generate_pairs(17, 750, classes, 4, cfg);

    // Handcrafted features independent of the model encoders: signal power
    // and normalized autocorrelations, which carry amplitude and frequency.
    auto features = [](const Waveform& w) {
      std::size_t n = w.samples.size();
      double power = 0.0;
      for (double v : w.samples) power += v * v;
      power /= static_cast<double>(n);
      Vec f;
      f.push_back(std::sqrt(power));
      for (std::size_t lag = 1; lag <= 12; ++lag) {
        double acc = 0.0;
        for (std::size_t t = lag; t < n; ++t)
          acc += w.samples[t] * w.samples[t - lag];
        f.push_back(acc / (static_cast<double>(n - lag) * power));
      }
      return f;
    };

    std::size_t train_n = 500;
    std::vector<Vec> centroids(classes);
    std::vector<std::size_t> counts(classes, 0);
    for (std::size_t i = 0; i < train_n; ++i) {
      Vec f = features(data[i].audio);
      std::size_t c = static_cast<std::size_t>(*data[i].label);
      if (centroids[c].empty()) centroids[c].assign(f.size(), 0.0);
      for (std::size_t d = 0; d < f.size(); ++d) centroids[c][d] += f[d];
      counts[c] += 1;
    }
    for (std::size_t c = 0; c < classes; ++c)
      for (double& v : centroids[c]) v /= static_cast<double>(counts[c]);

    std::size_t correct = 0;
    for (std::size_t i = train_n; i < data.size(); ++i) {
      Vec f = features(data[i].audio);
      std::size_t best = 0;
      double best_dist = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < classes; ++c) {
        double dist = 0.0;
        for (std::size_t d = 0; d < f.size(); ++d) {
          double diff = f[d] - centroids[c][d];
          dist += diff * diff;
        }
        if (dist < best_dist) {
          best_dist = dist;
          best = c;
        }
      }
      if (best == static_cast<std::size_t>(*data[i].label)) ++correct;
    }
    double acc =
        static_cast<double>(correct) / static_cast<double>(data.size() - train_n);
    REQUIRE(acc > 2.0 / static_cast<double>(classes));
  }
}

TEST_CASE("inject_cer") {
  TokenSequence base = make_tokens({5, 12, 7, 30, 2, 19, 44, 8, 23, 50, 3, 61});

  SECTION("target zero is the identity") {
    REQUIRE(inject_cer(base, 0.0, 99) == base);
  }

  SECTION("deterministic in the seed") {
    REQUIRE(inject_cer(base, 0.3, 5) == inject_cer(base, 0.3, 5));
  }

  SECTION("corpus CER lands in the calibrated band at the 0.187 target") {
    auto data = generate_pairs(23, 1500, 8, 3, fast_audio());
    std::vector<TokenSequence> refs;
    std::vector<TokenSequence> hyps;
    std::size_t tokens = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      refs.push_back(data[i].text);
      hyps.push_back(
          inject_cer(data[i].text, 0.187, derive_seed(23, "cer", i)));
      tokens += data[i].text.tokens.size();
    }
    REQUIRE(tokens >= 10000);
    double cer = corpus_cer(refs, hyps);
    REQUIRE(cer >= 0.167);
    REQUIRE(cer <= 0.207);
  }

  SECTION("full corruption measures at least 0.9 on long sequences") {
    Rng rng(31);
    std::vector<TokenSequence> refs;
    std::vector<TokenSequence> hyps;
    for (std::size_t i = 0; i < 300; ++i) {
      TokenSequence t;
      for (int j = 0; j < 16; ++j)
        t.tokens.push_back(static_cast<std::uint32_t>(rng.below(64)));
      refs.push_back(t);
      hyps.push_back(inject_cer(t, 1.0, 1000 + i));
    }
    REQUIRE(corpus_cer(refs, hyps) >= 0.9);
  }

  SECTION("monotone in expectation across targets") {
    TokenSequence t = make_tokens({1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16});
    auto mean_cer = [&](double target) {
      double total = 0.0;
      for (std::uint64_t seed = 0; seed < 200; ++seed)
        total += measure_cer(t, inject_cer(t, target, seed)).cer;
      return total / 200.0;
    };
    double low = mean_cer(0.05);
    double mid = mean_cer(0.187);
    double high = mean_cer(0.5);
    REQUIRE(low < mid);
    REQUIRE(mid < high);
  }

  SECTION("respects the length cap via truncation") {
    TokenSequence t = make_tokens({1, 2, 3, 4, 5, 6, 7, 8});
    for (std::uint64_t seed = 0; seed < 100; ++seed)
      REQUIRE(inject_cer(t, 1.0, seed, 64, 8).tokens.size() <= 8);
  }

  SECTION("never produces an empty sequence") {
    TokenSequence t = make_tokens({5});
    for (std::uint64_t seed = 0; seed < 200; ++seed)
      REQUIRE_FALSE(inject_cer(t, 1.0, seed).tokens.empty());
  }

  SECTION("parameter validation") {
    REQUIRE_THROWS_AS(inject_cer(base, -0.1, 1), InvalidArgument);
    REQUIRE_THROWS_AS(inject_cer(base, 1.1, 1), InvalidArgument);
    REQUIRE_THROWS_AS(inject_cer(base, std::nan(""), 1), InvalidArgument);
  }
}

TEST_CASE("measure_cer") {
  SECTION("identical sequences have zero CER") {
    TokenSequence t = make_tokens({4, 9, 2});
    CerReport r = measure_cer(t, t);
    REQUIRE(r.edit_distance == 0);
    REQUIRE(r.cer == 0.0);
  }

  SECTION("single substitution in three tokens") {
    CerReport r = measure_cer(make_tokens({1, 2, 3}), make_tokens({1, 9, 3}));
    REQUIRE(r.edit_distance == 1);
    REQUIRE_THAT(r.cer, Catch::Matchers::WithinAbs(1.0 / 3.0, 1e-15));
  }

  SECTION("two insertions over reference length two") {
    CerReport r = measure_cer(make_tokens({1, 2}), make_tokens({1, 2, 3, 4}));
    REQUIRE(r.edit_distance == 2);
    REQUIRE(r.cer == 1.0);
  }

  SECTION("empty hypothesis counts as full deletion") {
    CerReport r = measure_cer(make_tokens({1, 2, 3, 4}), TokenSequence{});
    REQUIRE(r.edit_distance == 4);
    REQUIRE(r.cer == 1.0);
  }

  SECTION("empty reference is undefined") {
    REQUIRE_THROWS_WITH(measure_cer(TokenSequence{}, make_tokens({1})),
                        "undefined CER");
  }

  SECTION("matches the full dynamic-programming oracle") {
    Rng rng(77);
    for (int trial = 0; trial < 100; ++trial) {
      TokenSequence a, b;
      std::size_t la = 1 + rng.below(12);
      std::size_t lb = rng.below(13);
      for (std::size_t i = 0; i < la; ++i)
        a.tokens.push_back(static_cast<std::uint32_t>(rng.below(4)));
      for (std::size_t i = 0; i < lb; ++i)
        b.tokens.push_back(static_cast<std::uint32_t>(rng.below(4)));
      CerReport r = measure_cer(a, b);
      REQUIRE(r.edit_distance == oracle::levenshtein_full(a.tokens, b.tokens));
      REQUIRE(r.reference_length == a.tokens.size());
      if (a == b) REQUIRE(r.cer == 0.0);
      if (r.cer == 0.0) REQUIRE(a == b);
    }
  }

  SECTION("symmetric for equal-length sequences") {
    Rng rng(79);
    for (int trial = 0; trial < 50; ++trial) {
      TokenSequence a, b;
      std::size_t len = 1 + rng.below(10);
      for (std::size_t i = 0; i < len; ++i) {
        a.tokens.push_back(static_cast<std::uint32_t>(rng.below(5)));
        b.tokens.push_back(static_cast<std::uint32_t>(rng.below(5)));
      }
      REQUIRE(measure_cer(a, b).edit_distance == measure_cer(b, a).edit_distance);
    }
  }
}

TEST_CASE("split_dataset") {
  auto data = generate_pairs(5, 30, 4, 2, fast_audio());

  SECTION("everything-in-train split is deterministic") {
    auto [train, valid, test] = split_dataset(data, {30, 0, 0}, 7);
    REQUIRE(train.size() == 30);
    REQUIRE(valid.empty());
    REQUIRE(test.empty());
    auto [train2, valid2, test2] = split_dataset(data, {30, 0, 0}, 7);
    REQUIRE(train == train2);
  }

  SECTION("table-style scaled partition sizes") {
    auto big = generate_pairs(6, 1980, 2, 2, fast_audio());
    auto [train, valid, test] = split_dataset(big, {1000, 500, 480}, 3);
    REQUIRE(train.size() == 1000);
    REQUIRE(valid.size() == 500);
    REQUIRE(test.size() == 480);
  }

  SECTION("union is the input multiset and splits are disjoint by id") {
    auto [train, valid, test] = split_dataset(data, {12, 9, 9}, 11);
    std::multiset<std::string> seen;
    for (const auto* part : {&train, &valid, &test})
      for (const PairedSample& s : *part) seen.insert(s.id);
    std::multiset<std::string> expected;
    for (const PairedSample& s : data) expected.insert(s.id);
    REQUIRE(seen == expected);
    REQUIRE(seen.size() == data.size());

    std::set<std::string> unique(seen.begin(), seen.end());
    REQUIRE(unique.size() == data.size());
  }

  SECTION("counts must sum to the dataset size") {
    REQUIRE_THROWS_AS(split_dataset(data, {20, 5, 4}, 1), InvalidArgument);
  }

  SECTION("different seeds give different partitions") {
    auto [a_train, a_valid, a_test] = split_dataset(data, {15, 10, 5}, 1);
    auto [b_train, b_valid, b_test] = split_dataset(data, {15, 10, 5}, 2);
    REQUIRE_FALSE(a_train == b_train);
  }
}

TEST_CASE("dataset files") {
  testsupport::TempDir dir;

  SECTION("empty list writes a header-only file") {
    std::string path = dir.file("empty.txt");
    write_dataset(path, {});
    std::ifstream in(path);
    std::string line;
    REQUIRE(std::getline(in, line));
    REQUIRE(line == "dsclap-dataset v1");
    REQUIRE_FALSE(std::getline(in, line));
    REQUIRE(read_dataset(path).empty());
  }

  SECTION("records preserve ids in order") {
    auto data = generate_pairs(13, 3, 2, 2, fast_audio());
    std::string path = dir.file("three.txt");
    write_dataset(path, data);
    auto back = read_dataset(path);
    REQUIRE(back.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) REQUIRE(back[i].id == data[i].id);
  }

  SECTION("round-trip is exact for generated data") {
    GeneratorConfig cfg = fast_audio();
    cfg.labeled = true;
    auto data = generate_pairs(29, 1000, 15, 3, cfg);
    for (auto& s : data)
      if (*s.label % 3 == 0) s.label.reset();  // exercise the empty field
    data[1].source = Source::asr;

    std::string path = dir.file("thousand.txt");
    write_dataset(path, data);
    auto back = read_dataset(path);
    REQUIRE(back == data);

    // A second pass through the quantizing format is also exact.
    std::string path2 = dir.file("thousand2.txt");
    write_dataset(path2, back);
    REQUIRE(read_dataset(path2) == back);
  }

  SECTION("arbitrary doubles stabilize after one round-trip") {
    Rng rng(41);
    PairedSample s;
    s.id = "x";
    s.text.tokens = {1, 2, 3};
    for (int i = 0; i < 64; ++i)
      s.audio.samples.push_back(rng.gaussian() * std::pow(10.0, (i % 13) - 6));

    std::string p1 = dir.file("a.txt");
    std::string p2 = dir.file("b.txt");
    write_dataset(p1, {s});
    auto once = read_dataset(p1);
    write_dataset(p2, once);
    auto twice = read_dataset(p2);
    REQUIRE(once == twice);
  }

  SECTION("malformed input names the line and field") {
    auto write_lines = [&](const std::string& name,
                           const std::vector<std::string>& lines) {
      std::string path = dir.file(name);
      std::ofstream out(path, std::ios::binary);
      for (const auto& l : lines) out << l << '\n';
      return path;
    };

    REQUIRE_THROWS_WITH(read_dataset(write_lines("h.txt", {"wrong header"})),
                        Catch::Matchers::ContainsSubstring("line 1"));

    std::string bad_fields = write_lines(
        "f.txt", {"dsclap-dataset v1", "p0\tmanual\t\t1 2"});
    REQUIRE_THROWS_WITH(read_dataset(bad_fields),
                        Catch::Matchers::ContainsSubstring("line 2") &&
                            Catch::Matchers::ContainsSubstring("5"));

    std::string bad_source = write_lines(
        "s.txt", {"dsclap-dataset v1", "p0\tweird\t\t1 2\t0.5 0.5"});
    REQUIRE_THROWS_WITH(read_dataset(bad_source),
                        Catch::Matchers::ContainsSubstring("source"));

    std::string bad_label = write_lines(
        "l.txt", {"dsclap-dataset v1", "p0\tmanual\tabc\t1 2\t0.5 0.5"});
    REQUIRE_THROWS_WITH(read_dataset(bad_label),
                        Catch::Matchers::ContainsSubstring("label"));

    std::string bad_token = write_lines(
        "t.txt", {"dsclap-dataset v1", "p0\tmanual\t\t1 x\t0.5 0.5"});
    REQUIRE_THROWS_WITH(read_dataset(bad_token),
                        Catch::Matchers::ContainsSubstring("text_tokens"));

    std::string bad_audio = write_lines(
        "a2.txt", {"dsclap-dataset v1", "p0\tmanual\t\t1 2\t0.5 zz"});
    REQUIRE_THROWS_WITH(read_dataset(bad_audio),
                        Catch::Matchers::ContainsSubstring("audio"));

    std::string nan_audio = write_lines(
        "n.txt", {"dsclap-dataset v1", "p0\tmanual\t\t1 2\t0.5 nan"});
    REQUIRE_THROWS_WITH(read_dataset(nan_audio),
                        Catch::Matchers::ContainsSubstring("audio"));

    REQUIRE_THROWS_AS(read_dataset(dir.file("missing.txt")), DataFormatError);
  }
}
