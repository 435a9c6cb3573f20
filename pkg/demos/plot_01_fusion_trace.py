"""
Query fusion on an analytics conversation
=========================================

A ten-turn text-to-vis conversation where every follow-up edits the
previous request. Query fusion feeds the model only the last rewritten
question plus the new input, so the rewrite acts as a running summary.
"""

from convrewrite import QUERY_FUSION, ConversationSession, RuleFusionMock, advance_fusion_session
from convrewrite.fixtures import TABLE1_INPUTS

model = RuleFusionMock()
session = ConversationSession("demo")

for query in TABLE1_INPUTS:
    session, outcome = advance_fusion_session(session, query, None, QUERY_FUSION, model)
    print(f"{query!r:40} -> {outcome.rewritten_query}")

###############################################################################
# The prompt for the last turn carries a single context item: the previous
# rewrite. None of the raw follow-ups before it reach the model.

print()
print(outcome.prompt)
