/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, The treesel Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <stdexcept>
#include <string>

namespace treesel {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define TREESEL_DEFINE_ERROR(Name)             \
  class Name : public Error {                  \
   public:                                     \
    using Error::Error;                        \
  }

TREESEL_DEFINE_ERROR(InvalidProgram);
TREESEL_DEFINE_ERROR(NumericalFailure);
TREESEL_DEFINE_ERROR(UnboundedProblem);
TREESEL_DEFINE_ERROR(ShapeMismatch);
TREESEL_DEFINE_ERROR(EmptyCandidates);
TREESEL_DEFINE_ERROR(NotACandidate);
TREESEL_DEFINE_ERROR(InsufficientData);
TREESEL_DEFINE_ERROR(NonFiniteLoss);
TREESEL_DEFINE_ERROR(PoolExhausted);
TREESEL_DEFINE_ERROR(EmptyAfterFilter);
TREESEL_DEFINE_ERROR(CorruptModel);
TREESEL_DEFINE_ERROR(VersionMismatch);
TREESEL_DEFINE_ERROR(ParseError);

#undef TREESEL_DEFINE_ERROR

}  // namespace treesel
