#pragma once

#include <string>
#include <vector>

#include "guardforge/client.hpp"
#include "guardforge/core.hpp"

namespace guardforge {

/// Canonical rendering of a sample as trainer "input" text: the human turn
/// followed by the AI turn ("None" when the sample has no response). Mining,
/// evaluation, and the trainer exports all use this exact rendering so the
/// model sees one format everywhere.
std::string render_input(const Sample& sample);

/// One user message: the plain-text task instruction, a blank line, then
/// render_input(sample). The instruction carries no placeholders and never
/// sees gold labels.
std::vector<ChatMessage> build_instruction_messages(const Sample& sample,
                                                    const std::string& instruction);

} // namespace guardforge
