#ifndef UDPARSE_DECODE_H_
#define UDPARSE_DECODE_H_

#include <string>
#include <vector>

#include "udparse/tensor.h"

namespace udparse {

struct DependencyTree {
  std::vector<int> heads;          // heads[i] is the head of word i+1 (0 = root)
  std::vector<std::string> rels;   // same indexing; may be empty before labeling
};

// Arc score matrices are (n+1) x (n+1) with arc.at(h, d) the score of head h
// for dependent d. Column 0 and the diagonal are ignored by the decoders.

// True when `heads` is a single-rooted arborescence over words 1..n.
bool IsValidTree(const std::vector<int>& heads);

// Sum of arc.at(heads[i], i+1).
double TreeScore(const Tensor& arc, const std::vector<int>& heads);

// Greedy head selection followed by root repair and iterative cycle repair.
//  1. every word takes its best head (ties: lowest head index);
//  2. if the number of words attached to the root is not one, the candidate
//     with the largest root margin (root score minus best non-root score) is
//     kept as the only root and the rest move to their best non-root head;
//  3. while a cycle exists, each cycle word is scored by the loss of moving it
//     to its best head among words already connected to the root, and the
//     cheapest move is applied (ties: lowest word, then lowest head).
// Every comparison is within one column or between column-relative margins,
// so adding a constant to a column never changes the result.
std::vector<int> GreedyFixDecode(const Tensor& arc);

// Maximum spanning arborescence (Chu-Liu-Edmonds) with exactly one child of
// the root.
std::vector<int> CleDecode(const Tensor& arc);

enum class Decoder { kGreedyFix, kCle };

std::vector<int> DecodeHeads(const Tensor& arc, Decoder decoder);

Decoder ParseDecoder(const std::string& name);
std::string DecoderName(Decoder d);

}  // namespace udparse

#endif  // UDPARSE_DECODE_H_
