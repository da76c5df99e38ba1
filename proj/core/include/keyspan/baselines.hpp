#pragma once

#include <map>
#include <string>
#include <vector>

#include "keyspan/corpus.hpp"
#include "keyspan/metrics.hpp"

namespace keyspan {

// Inverse document frequencies over a reference corpus. Lookup of a word
// never seen at build time behaves as df = 1.
struct IdfTable {
  std::map<std::string, double> idf;  // lowercased word -> ln(D / df)
  long n_docs = 0;

  double lookup(const std::string& word_lower) const;
};

IdfTable build_idf(const std::vector<Document>& corpus);
void save_idf(const IdfTable& table, const std::string& path);
IdfTable load_idf(const std::string& path);

// Equal-K protocol: K is the rounded (half-up) mean number of model
// predictions per document, floored at 1. Zero predictions overall also
// yield 1, with a warning flag.
int compute_k(const std::vector<int>& predictions_per_doc,
              bool* warned = nullptr);

// Document-global candidate spans ranked by the mean word tf-idf of the
// span (tf = count / doc word count). Ties broken by earlier word_start,
// then earlier word_end. Returns the top K spans, each occurrence its own
// span.
std::vector<Span> tfidf_rank(const Document& doc,
                             const std::vector<Span>& candidates,
                             const IdfTable& idf, int k);

// Per-candidate score, exposed for tests and diagnostics.
double tfidf_score(const Document& doc, const Span& span, const IdfTable& idf);

}  // namespace keyspan
