// include/ft/tokens.h
//
// Reserved token ids shared by the vocabulary, the models and the lattice.
// Output column k of a lattice row is token id k; column 0 is the blank.

#ifndef FT_TOKENS_H_
#define FT_TOKENS_H_

namespace ft {

constexpr int kBlank = 0;
constexpr int kBos = 1;
constexpr int kEos = 2;
constexpr int kUnk = 3;
constexpr int kNumReserved = 4;

}  // namespace ft

#endif  // FT_TOKENS_H_
