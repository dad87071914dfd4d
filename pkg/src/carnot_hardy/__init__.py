"""Hardy-type inequalities on R^n and Heisenberg groups: exact operator identities and numerical certification."""
