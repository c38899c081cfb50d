#pragma once

#include <string>

#include "relcomp/completion.hpp"
#include "relcomp/dataset.hpp"
#include "relcomp/planner.hpp"

namespace relcomp {

// Binary artifact I/O. Every format starts with a 4-byte magic and a u32
// version; mismatches raise VersionMismatchError, truncation or garbage
// raises SerializationError. All integers are little-endian, doubles and
// floats are raw IEEE-754, strings are u64 length + bytes. Writes go to a
// temp file in the target directory and are renamed into place.

inline constexpr uint32_t kArtifactVersion = 1;

// Ingested dataset ("RCDS"): encoded tables, tuple-factor columns, and
// relationship completeness flags. FK row indexes are rebuilt on load.
void save_dataset(const Dataset& dataset, const std::string& path);
Dataset load_dataset(const std::string& path, const AnnotatedSchema& schema);

// Trained model catalog ("RCMO"): encoders, training config, and one record
// per entry. Entries of the same merged spec share an autoregressive core;
// sharing is preserved through a core table. Loading verifies the stored
// encoder fingerprint so models are never applied to a differently encoded
// dataset.
void save_catalog(const ModelCatalog& catalog, const std::string& path);
ModelCatalog load_catalog(const std::string& path, const AnnotatedSchema& schema);

// Completed join ("RCCJ"): byte-exact round trip, including synthesized
// cell distributions, so cached completions serve identical results.
void save_completed_join(const CompletedJoin& join, const std::string& path);
CompletedJoin load_completed_join(const std::string& path);

}  // namespace relcomp
