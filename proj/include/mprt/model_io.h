#ifndef MPRT_MODEL_IO_H_
#define MPRT_MODEL_IO_H_

#include <string>

#include "mprt/model.h"

namespace mprt {

inline constexpr int kModelFormatVersion = 1;

// Writes <prefix>.manifest (text: layer kinds, shapes, metadata) and
// <prefix>.weights (little-endian float32, per parameterised layer the
// weights then the bias, in layer order).
void SaveModel(const Model& model, const std::string& prefix);

// Bit-exact inverse of SaveModel. Throws kFormat on malformed or truncated
// files, kVersionMismatch on a foreign format version.
Model LoadModel(const std::string& prefix);

}  // namespace mprt

#endif  // MPRT_MODEL_IO_H_
