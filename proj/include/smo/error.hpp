#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace smo {

enum class Errc {
  ConfigError,
  UndeclaredRoute,
  DuplicateComponent,
  ComponentDown,
  UnknownInterface,
  SchemaMismatch,
  CollectionTimeout,
  EmptyDataset,
  UnmappableField,
  InsufficientData,
  NonFiniteUpdate,
  EmptyTrainSet,
  SingularSystem,
  EmptyEvalSet,
  EmptySearchSpace,
  InvalidArtifact,
  IllegalTransition,
  RefinementBudgetExhausted,
  NoDataSources,
  InsufficientDomains,
  UnsupportedKind,
  FileNotFound,
  MissingKey,
  SinglePointFailure,
  ZeroCapacity,
};

std::string_view to_string(Errc code);

/// Every failure raised by the simulator carries one of the codes above.
/// `field` is the config path when the error originates from validation.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message, std::string field = {});

  Errc code() const noexcept { return code_; }
  const std::string& field() const noexcept { return field_; }

 private:
  Errc code_;
  std::string field_;
};

}  // namespace smo
