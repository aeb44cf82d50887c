# Batched B+ tree search
