#pragma once

#include <iosfwd>

#include "kadapt/config.hpp"

namespace kadapt {

/**
 * Runs the configured experiment. Experiments write one trace file per seed
 * (`seed_<N>.csv` or `.jsonl`, the primary Kalman arm) and `aggregate.json`
 * into `config.output_path`; `verify` writes `verify_report.json`.
 * Returns 0 on success, 1 if any verify check failed.
 */
int dispatch(const RunConfig& config, unsigned threads, std::ostream& log);

}  // namespace kadapt
