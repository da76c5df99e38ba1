// Microbenchmarks for the pipeline hot paths: windowing, candidate
// chunking, subword encoding, the encoder forward pass, per-candidate
// head scoring, and the span scorers. Fixtures are generated once from a
// fixed seed so runs are comparable across machines and revisions.

#include <benchmark/benchmark.h>

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "keyspan/baselines.hpp"
#include "keyspan/candidates.hpp"
#include "keyspan/corpus.hpp"
#include "keyspan/extraction.hpp"
#include "keyspan/metrics.hpp"
#include "keyspan/model.hpp"
#include "keyspan/rng.hpp"
#include "keyspan/synth.hpp"

namespace {

using namespace keyspan;

struct Fixture {
  SynthCorpus corpus;     // regular-length documents for idf and scoring
  Document long_doc;      // one 3000-word document for windowing
  BpeTokenizer tokenizer;
  EncoderParams encoder;
  LILHead head;
};

const Fixture& fixture() {
  static const Fixture fx = [] {
    Fixture f;

    SynthSpec spec;
    spec.n_docs = 20;
    spec.seed = 1234;
    f.corpus = generate(spec);

    SynthSpec long_spec;
    long_spec.n_docs = 1;
    long_spec.doc_length = 3000;
    long_spec.seed = 1235;
    f.long_doc = generate(long_spec).docs.front();

    f.tokenizer = BpeTokenizer::train(f.corpus.docs, 400);

    EncoderConfig ecfg;
    ecfg.vocab = f.tokenizer.vocab_size();
    Rng enc_rng(Rng::derive(1236, 0));
    f.encoder = EncoderParams::init(ecfg, enc_rng);

    const int T = 8;
    f.head.mode = LabelMode::multi_label;
    f.head.w = Mat(ecfg.d, T);
    f.head.b = Mat(1, T);
    Rng head_rng(Rng::derive(1236, 1));
    for (double& x : f.head.w.a) x = head_rng.normal(0.0, 0.3);
    for (double& x : f.head.b.a) x = head_rng.normal(0.0, 0.3);
    return f;
  }();
  return fx;
}

void BM_SplitBlocks(benchmark::State& state) {
  const Document& doc = fixture().long_doc;
  for (auto _ : state) {
    auto blocks = split_blocks(doc, 512, 128);
    benchmark::DoNotOptimize(blocks);
  }
  state.SetItemsProcessed(state.iterations() *
                          static_cast<std::int64_t>(doc.words.size()));
}
BENCHMARK(BM_SplitBlocks);

void BM_CandidateChunking(benchmark::State& state) {
  const TextBlock block = split_blocks(fixture().long_doc, 512, 128).front();
  for (auto _ : state) {
    const PosTaggedBlock tags = tag_block(block);
    auto cands = extract_candidates(block, tags);
    benchmark::DoNotOptimize(cands);
  }
  state.SetItemsProcessed(state.iterations() *
                          static_cast<std::int64_t>(block.size()));
}
BENCHMARK(BM_CandidateChunking);

void BM_SubwordEncode(benchmark::State& state) {
  const Fixture& fx = fixture();
  const TextBlock block = split_blocks(fx.long_doc, 512, 128).front();
  for (auto _ : state) {
    auto enc = fx.tokenizer.encode(block.words, block.char_offset);
    benchmark::DoNotOptimize(enc);
  }
  state.SetItemsProcessed(state.iterations() *
                          static_cast<std::int64_t>(block.size()));
}
BENCHMARK(BM_SubwordEncode);

// Forward pass cost is quadratic in the token count, so the block size
// range brackets the configurations the trainer actually uses. At 512
// words the subtoken count hits the encoder's max_len and gets truncated,
// which is why that timing flattens instead of quadrupling.
void BM_EncoderForward(benchmark::State& state) {
  const Fixture& fx = fixture();
  const int block_size = static_cast<int>(state.range(0));
  const TextBlock block =
      split_blocks(fx.long_doc, block_size, block_size / 4).front();
  for (auto _ : state) {
    const BlockEncoding enc = encode_block(fx.encoder, fx.tokenizer, block);
    benchmark::DoNotOptimize(enc.summary_vector);
  }
  state.SetItemsProcessed(state.iterations() *
                          static_cast<std::int64_t>(block.size()));
}
BENCHMARK(BM_EncoderForward)->Arg(64)->Arg(128)->Arg(256)->Arg(512)
    ->Unit(benchmark::kMillisecond);

void BM_HeadScoring(benchmark::State& state) {
  const Fixture& fx = fixture();
  const TextBlock block = split_blocks(fx.long_doc, 256, 64).front();
  const BlockEncoding enc = encode_block(fx.encoder, fx.tokenizer, block);
  const auto cands = block_candidates(block, enc, true);
  const LabelDistribution l_cls = cls_forward(fx.head, enc.summary_vector);
  const std::set<int> predicted = {0, 2, 5};
  TopicSchema schema;
  for (int t = 0; t < 8; ++t) {
    schema.topic_ids.push_back("t" + std::to_string(t));
  }
  for (auto _ : state) {
    for (const CandidatePhrase& cand : cands) {
      const Vec phrase = pool_phrase(enc, cand);
      const LabelDistribution l_i =
          lil_forward(fx.head, phrase, enc.summary_vector);
      auto scores = score_phrase(l_cls, l_i, predicted, schema);
      benchmark::DoNotOptimize(scores);
    }
  }
  state.SetItemsProcessed(state.iterations() *
                          static_cast<std::int64_t>(cands.size()));
}
BENCHMARK(BM_HeadScoring);

void BM_SpanReport(benchmark::State& state) {
  // 100 documents with ten predicted and ten gold spans apiece, built
  // once; the scorer has to dedup, match, and pool all of it per call.
  SpanSets pred, gold;
  Rng rng(Rng::derive(1237, 0));
  for (int d = 0; d < 100; ++d) {
    const std::string id = "doc" + std::to_string(d);
    for (int s = 0; s < 10; ++s) {
      const int ps = rng.range_int(0, 400);
      pred[id].push_back({ps, ps + rng.range_int(1, 4)});
      const int gs = rng.range_int(0, 400);
      gold[id].push_back({gs, gs + rng.range_int(1, 4)});
    }
  }
  for (auto _ : state) {
    const SpanMatchReport report = span_report(pred, gold);
    benchmark::DoNotOptimize(report.avg_f1);
  }
  state.SetItemsProcessed(state.iterations() * 100);
}
BENCHMARK(BM_SpanReport);

void BM_TfidfRank(benchmark::State& state) {
  const Fixture& fx = fixture();
  const IdfTable idf = build_idf(fx.corpus.docs);
  const Document& doc = fx.corpus.docs.front();
  std::set<Span> seen;
  for (const TextBlock& block : split_blocks(doc, 512, 128)) {
    const PosTaggedBlock tags = tag_block(block);
    for (const CandidatePhrase& c : extract_candidates(block, tags)) {
      const int start = to_global(block, c.word_start);
      seen.insert({start, start + (c.word_end - c.word_start)});
    }
  }
  const std::vector<Span> cands(seen.begin(), seen.end());
  for (auto _ : state) {
    auto ranked = tfidf_rank(doc, cands, idf, 10);
    benchmark::DoNotOptimize(ranked);
  }
  state.SetItemsProcessed(state.iterations() *
                          static_cast<std::int64_t>(cands.size()));
}
BENCHMARK(BM_TfidfRank);

}  // namespace

int main(int argc, char** argv) {
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
