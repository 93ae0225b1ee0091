#pragma once

#include <stdexcept>
#include <string>

namespace wsa {

struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input file (vector file, dataset, ledger, report).
struct format_error : error {
  using error::error;
};

// Precondition violation on otherwise well-formed data.
struct domain_error : error {
  using error::error;
};

// Word not present in an embedding store or model vocabulary.
struct oov_error : error {
  using error::error;
};

// Zero difference vector between two embeddings.
struct degenerate_error : error {
  using error::error;
};

// Remote response that does not parse as the wire protocol.
struct protocol_error : error {
  using error::error;
};

// Target query failed (transport exhausted retries, or HTTP >= 400).
struct query_error : error {
  int http_status = 0;
  explicit query_error(const std::string& msg, int status = 0)
      : error(msg), http_status(status) {}
};

// Thrown by an attack session when the per-document budget is hit.
// Caught by the attack engines, never escapes to callers.
struct budget_exhausted : error {
  using error::error;
};

}  // namespace wsa
