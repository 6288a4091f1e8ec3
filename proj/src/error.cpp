#include "hiersearch/error.hpp"

namespace hiersearch {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kIo: return "io";
    case ErrorKind::kFormat: return "format";
    case ErrorKind::kDimension: return "dimension";
    case ErrorKind::kValidation: return "validation";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kInsufficientData: return "insufficient-data";
    case ErrorKind::kNumerical: return "numerical";
    case ErrorKind::kQuery: return "query";
    case ErrorKind::kEmptyResult: return "empty-result";
  }
  return "unknown";
}

}  // namespace hiersearch
