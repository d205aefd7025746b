"""
集成测试包

包含端到端的消息流程测试。
"""
