# Training, inference, benchmark and ablation workers
