// Prompt templates, verbatim. Placeholders are {snake_case} slots.

#include "hcc/prompts.hpp"

namespace hcc {

namespace {

constexpr const char* kDescriptorTemplate = R"PROMPT(You are an expert ML researcher. Your job is to summarize a machine learning competition task description into a single dense paragraph optimized for embedding-based retrieval.

Your summary must:

- Focus ONLY on essential technical details present in the description.

- Be dense, precise, and semantic-rich.

- Stay strictly below 250 tokens.

- Contain all relevant elements: task type, input format, output format, evaluation metric (and how it is computed), dataset structure and key fields/modalities, submission format, and any important constraints or rules.

STRICT FORMAT REQUIREMENTS:

- Output MUST be a single paragraph.

- No bullet points, no numbering, no markdown.

- No headings, no blank lines, no lists.

- No backticks or code blocks.

- No special characters other than standard punctuation.

- Do NOT introduce information that is not explicitly present in the task description.

- Do NOT explain ML concepts or provide suggestions, analysis, or background.

TASK DESCRIPTION:

----------------

{task_description}

----------------

Now output ONLY the summarized single paragraph, with no explanations:
)PROMPT";

constexpr const char* kDraftTemplate = R"PROMPT(You are a Kaggle grandmaster attending a competition. In order to win this competition, you need to come up with an excellent and creative plan for a solution and then implement this solution in Python. We will now provide a description of the task.

# Task description

{task_description}

# Instructions

## Response format

Your response should be a brief outline/sketch of your proposed solution in natural language (3-5 sentences), followed by a single markdown code block (wrapped in ```) which implements this solution and prints out the evaluation metric. There should be no additional headings or text in your response. Just natural language text followed by a newline and then the markdown code block.

## Solution sketch guideline

- - The solution sketch should be 3-5 sentences.

- - Propose an evaluation metric that is reasonable for this task.

- - Don't suggest to do EDA.

- - The data is already prepared and available in the `./input` directory. There is no need to unzip any files.


## Implementation guideline

- The code must not only implement the proposed solution but also **print the evaluation metric computed on a hold-out validation set**. **Without this metric, the solution cannot be evaluated, rendering the entire code invalid.**,

- **AND MOST IMPORTANTLY SAVE PREDICTIONS ON THE PROVIDED UNLABELED TEST DATA IN A `submission.csv` FILE IN THE ./submission/ DIRECTORY.**
- The code should be a single-file python program that is self-contained and can be executed as-is.

- No parts of the code should be skipped, don't terminate the before finishing the script.

- Your response should only contain a single code block.

- All the provided input data is stored in "./input" directory.

- **You MUST submit predictions on the provided unlabeled test data in a `submission.csv` file** file in the "./working" directory as described in the task description** This is extremely important since this file is used for grading/evaluation. DO NOT FORGET THE submission.csv file!

- You can also use the "./working" directory to store any temporary files that your code needs to create.

- REMEMBER THE ./submission/submission.csv FILE!!!!! The correct directory is important too.

- If you use `DataLoader`, you need to increase the parameter `num_workers` to speed up the training process.

## Installed Packages

Your solution can use any relevant machine learning packages such as: `pandas`, `statsmodels`, `torch-geometric`, `bayesian-optimization`, `torch`, `xgboost`, `spacy`, `timm`, `scikit-learn`, `transformers`, `nltk`, `lightGBM`, `numpy`, `torchvision`. Feel free to use any other packages too (all packages are already installed!). For neural networks we suggest using PyTorch rather than TensorFlow.

# Data preview

{data_preview}

# External knowledge

Here are some information about the data loading and preprocessing and model selection and the model training from kaggle experts. Your final code must follow and use these knowledge.

## Data loading and preprocessing

{data_knowledge}

## Model selection and model training

{model_knowledge}
)PROMPT";

constexpr const char* kDebugTemplate = R"PROMPT(You are a Kaggle grandmaster attending a competition. Your previous solution had a bug and/or did not produce a submission.csv, or the generated submission.csv was in an incorrect format,so based on the information below, you should revise it in order to fix this. Your response should be an implementation outline in natural language, followed by a single markdown code block which implements the bugfix/solution.

# Task description

{task_description}

# Instructions

## Response format

Your response should be a brief outline/sketch of your proposed solution in natural language (3-5 sentences), followed by a single markdown code block (wrapped in ```) which implements this solution and prints out the evaluation metric. There should be no additional headings or text in your response. Just natural language text followed by a newline and then the markdown code block.

## Bugfix improvement sketch guideline

- - You should write a brief natural language description (3-5 sentences) of how the issue in the previous implementation can be fixed.

- - Don't suggest to do EDA.

- - You should keep the core method of the machine learning code same. Do not change the machine learning method and just fix the code.

- - If the code failed because of missing library, try to avoid using the missing library. Do not try to install the missing library.

- - All packages have been installed. You are not allowed to install anything with pip or conda. If something is missing, try another way instead of installing a package.

## Implementation guideline

- The code must not only implement the proposed solution but also **print the evaluation metric computed on a hold-out validation set**. **Without this metric, the solution cannot be evaluated, rendering the entire code invalid.**,

- **AND MOST IMPORTANTLY SAVE PREDICTIONS ON THE PROVIDED UNLABELED TEST DATA IN A `submission.csv` FILE IN THE ./submission/ DIRECTORY.**

- The code should be a single-file python program that is self-contained and can be executed as-is.

- No parts of the code should be skipped, don't terminate the before finishing the script.

- Your response should only contain a single code block.

- All the provided input data is stored in "./input" directory.

- **You MUST submit predictions on the provided unlabeled test data in a `submission.csv` file** file in the "./working" directory as described in the task description** This is extremely important since this file is used for grading/evaluation. DO NOT FORGET THE submission.csv file!

- You can also use the "./working" directory to store any temporary files that your code needs to create.

- REMEMBER THE ./submission/submission.csv FILE!!!!! The correct directory is important too.

- If you use `DataLoader`, you need to increase the parameter `num_workers` to speed up the training process.

# Data preview

{data_preview}

# Previous (buggy) implementation

{buggy_code}

# Execution output

{terminal_output}
)PROMPT";

constexpr const char* kPlanTemplate = R"PROMPT(You are a Kaggle Grandmaster participating in a Kaggle competition. I will provide you with the following information in order: (1) the competition description, (2) a preview of the dataset format, and (3) the initial code and the current best-performing code. (4) your memory including your previous tried research plans and corresponding summarized results

Competition Information:

{task_description}

Dataset Preview:

{data_preview}

Initial code:

{initial_code}

Current Best Code:

{best_code}

Memory(your previous tried research plans and corresponding summarized results):

{memory}

Based on the information above and the best code provided, identify at least 3 major directions where the solution can be improved to potentially achieve better performance. For each major area, propose some highly practical and feasible detailed suggestions.

Do not suggest ensembling methods.

Do not suggest k-cross validation with k larger than 5.

You suggestions should not have any ambiguity. Avoid using `e.g.` and `or` in your answer.

Your response must strictly follow a JSON format. `major direction k` and `Your detailed suggestion k` should be replaced with your concrete answer.

Below is an example:

{

    "major direction 1": {

        "1": "Your detailed and specific suggestion 1",

        "2": "Your detailed and specific suggestion 2"

    },

    "major direction 2": {

        "1": "Your detailed and specific suggestion 1",

        "2": "Your detailed and specific suggestion 2",

    },

    "major direction 3": {

        "1": "Your detailed and specific suggestion 1",

        "2": "Your detailed and specific suggestion 2",

    }

}
)PROMPT";

constexpr const char* kImproveTemplate = R"PROMPT(You are a Kaggle grandmaster attending a competition. You are provided with previous memory including previously developed solutions and an creative idea. You need to implement this idea on top of (or building upon) the previously developed solution and memory.

# Task description

Here is the original kaggle task description.

{task_description}

# Instructions

Here is the instruction about response format and implementation.

## Response format

Your response should be a brief outline/sketch of the solution in natural language (3-5 sentences), followed by a single markdown code block (wrapped in ```) which implements this solution and prints out the evaluation metric. There should be no additional headings or text in your response. Just natural language text followed by a newline and then the markdown code block.

## Solution improvement sketch guideline

- - The solution sketch should be a brief natural language description of how you improved the previous solution.

- - The solution sketch should be 3-5 sentences.

- - Don't do EDA.

- - All packages have been installed. You are not allowed to install anything with pip or conda. If something is missing, try another way instead of installing a package.

## Implementation guideline

- The code must not only implement the creative idea but also **print the evaluation metric computed on a hold-out validation set**. **Without this metric, the solution cannot be evaluated, rendering the entire code invalid.**,

- **AND MOST IMPORTANTLY SAVE PREDICTIONS ON THE PROVIDED UNLABELED TEST DATA IN A `submission.csv` FILE IN THE ./submission/ DIRECTORY.**

- The code should be a single-file python program that is self-contained and can be executed as-is.

- No parts of the code should be skipped, don't terminate the before finishing the script.

- Your response should only contain a single code block.

- All the provided input data is stored in "./input" directory.

- **You MUST submit predictions on the provided unlabeled test data in a `submission.csv` file** file in the "./working" directory as described in the task description** This is extremely important since this file is used for grading/evaluation. DO NOT FORGET THE submission.csv file!

- You can also use the "./working" directory to store any temporary files that your code needs to create.

- REMEMBER THE ./submission/submission.csv FILE!!!!! The correct directory is important too.

- If you use `DataLoader`, you need to increase the parameter `num_workers` to speed up the training process.

# Data preview

Here is a preview of the real structure of the data.

{data_preview}

# Previous memory and solution

{previous_memory_solution}

# Creative idea

This is a creative idea which may improve the performance. You need to implement this idea on top of (or building upon) the previous solution above.

Creative idea:

{improve_idea}
)PROMPT";

constexpr const char* kPromoteP1Template = R"PROMPT(You are a Kaggle Grandmaster with critical thinking skills participating in a high-stakes competition. I will provide you with: (1) the competition task, (2) your memory of previous attempted research plans and summarized results, and (3) your current research plan along with its raw results (code outputs, logs, etc.).

Competition Information:

{task_description}

Memory:

{memory}

Current Research Plan:

{research_plan}

Corresponding Results:

{results}

# Your Task

Your goal is to perform a deep analysis of the current experiment and synthesize it into a strategic summary. Your summary needs to be concise but informative.
**Do not just describe what happened.** You must evaluate the **value** of the result.

Your output must cover two key aspects:

1.  **Execution Summary:** Concisely state whether the plan worked as intended, the performance achieved.

2.  **Strategic Insights & Future Direction:** This is the most important part. Based on the current results AND your memory of past attempted research plans:

    * Identify **High-Potential Directions**: Which direction seems to be promising? Which direction should be amplified or iterated upon in the next step?

    * Identify **Dead Ends / Low-Value Paths**: Which directions are clearly ineffective or have reached a performance plateau? Explicitly advise against continuing in these specific directions to save compute resources.

# Response Format

Your output should contain **only** the final analysis text.

Do not add any explanations, comments, greetings, or extra sentences before or after the summary.

Do not wrap the answer with phrases like "Here is the summary". Output the content directly.
)PROMPT";

constexpr const char* kPromoteP2Template = R"PROMPT(Here is the kaggle task description, exploration trajectories and the final high performance code of the task {task_name}.

Based on these information. Your job is to

1. summarize the key point about the data loading and preprocessing of the best code.

2. summarize the key point about the model selection and the model training of the best code.

Your response should be concise but not too short. Do not omit any parameters. You should make sure an code engineer can basically reproduce the code with your summarization.

Kaggle task description:

{task_description}

Trajectories and final code:

{trajectories}

Your answer should follow the format below:

DATA SUMMARY:

YOUR ANSWER

MODEL SUMMARY:

YOUR ANSWER
)PROMPT";

}  // namespace

std::string_view prompt_template(PromptName name) {
    switch (name) {
        case PromptName::Descriptor: return kDescriptorTemplate;
        case PromptName::Draft: return kDraftTemplate;
        case PromptName::Debug: return kDebugTemplate;
        case PromptName::Plan: return kPlanTemplate;
        case PromptName::Improve: return kImproveTemplate;
        case PromptName::PromoteP1: return kPromoteP1Template;
        case PromptName::PromoteP2: return kPromoteP2Template;
    }
    return {};
}

}  // namespace hcc
