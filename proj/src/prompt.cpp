#include "guardforge/prompt.hpp"

namespace guardforge {

std::string render_input(const Sample& sample) {
    std::string out = "Human user:\n";
    out += sample.prompt;
    out += "\n\nAI assistant:\n";
    out += sample.has_response() ? sample.response : "None";
    return out;
}

std::vector<ChatMessage> build_instruction_messages(const Sample& sample,
                                                    const std::string& instruction) {
    const std::string text = trim(instruction);
    if (text.empty()) {
        throw Error(ErrorKind::InvalidArgument, "instruction template is empty");
    }
    return {ChatMessage{"user", text + "\n\n" + render_input(sample)}};
}

} // namespace guardforge
