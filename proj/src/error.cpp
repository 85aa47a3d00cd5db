#include "crossadapt/error.hpp"

namespace crossadapt {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Dimension: return "dimension";
    case ErrorKind::Shape: return "shape";
    case ErrorKind::Parameter: return "parameter";
    case ErrorKind::Data: return "data";
    case ErrorKind::Schema: return "schema";
    case ErrorKind::Input: return "input";
    case ErrorKind::State: return "state";
    case ErrorKind::Contract: return "contract";
    case ErrorKind::Protocol: return "protocol";
    case ErrorKind::MetricUndefined: return "metric-undefined";
    case ErrorKind::Numeric: return "numeric";
    case ErrorKind::Validation: return "validation";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

}  // namespace crossadapt
