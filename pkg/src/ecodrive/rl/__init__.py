"""Learning components: action codec, observation stacking, dueling
Q-network, prioritized replay, and the trainer."""
