from .decision_cache import DecisionCache, DecisionCacheEntry, cache_key

__all__ = ["DecisionCache", "DecisionCacheEntry", "cache_key"]
